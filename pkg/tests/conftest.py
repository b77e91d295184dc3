"""Shared fixtures: geometric CT phantoms, manifest builders, and a
hand-rolled DICOM byte crafter (the byte layout is written out manually
here so parser tests do not depend on the parser)."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import pytest

from synthct_eval.imaging import (
    DEFAULT_HU_RANGE,
    ImageSet,
    Modality,
    SliceImage,
    save_portable_slice,
)

HU_LO, HU_HI = DEFAULT_HU_RANGE


def make_phantom_slice(
    volume_id: str,
    slice_index: int,
    n_slices: int,
    rng: np.random.Generator,
    rows: int = 64,
    cols: int = 64,
    noise_sigma: float = 0.0,
) -> SliceImage:
    """A CT-like slice whose anatomy varies along the axial position.

    Air background, an elliptical soft-tissue body with texture, a bone
    rim, an organ disc that grows toward the feet, and a dark lung region
    in the rostral fifth. noise_sigma is in HU.
    """
    t = slice_index / max(n_slices - 1, 1)
    yy, xx = np.mgrid[0:rows, 0:cols]
    cy, cx = rows / 2.0, cols / 2.0
    # per-slice anatomical jitter so distinct sets really differ
    wobble = rng.uniform(-0.04, 0.04, size=3)
    ry = rows * (0.30 + 0.08 * np.sin(np.pi * t) + wobble[0])
    rx = cols * (0.36 + 0.06 * np.sin(np.pi * t) + wobble[1])
    r2 = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2

    values = np.full((rows, cols), -1000.0)
    body = r2 <= 1.0
    values[body] = 40.0 + rng.normal(0.0, 15.0, size=int(body.sum()))
    rim = (r2 <= 1.0) & (r2 >= rng.uniform(0.78, 0.86))
    values[rim] = 700.0 + rng.normal(0.0, 40.0, size=int(rim.sum()))

    organ_r = rows * (0.10 + wobble[2]) * (1.0 - 0.7 * t)
    oy, ox = cy * 0.8 + rng.uniform(-2, 2), cx * 1.2 + rng.uniform(-2, 2)
    organ = ((yy - oy) ** 2 + (xx - ox) ** 2) <= organ_r**2
    values[organ & body] = 90.0 + rng.normal(0.0, 10.0, size=int((organ & body).sum()))
    if t > 0.8:
        lung = ((yy - cy) ** 2 + (xx - cx * 0.7) ** 2) <= (rows * 0.12) ** 2
        values[lung & body] = -800.0 + rng.normal(0.0, 30.0, size=int((lung & body).sum()))

    if noise_sigma > 0.0:
        values = values + rng.normal(0.0, noise_sigma, size=values.shape)
    values = np.clip(values, HU_LO, HU_HI)
    return SliceImage(
        volume_id=volume_id,
        slice_index=slice_index,
        rows=rows,
        cols=cols,
        pixel_spacing=(0.75, 0.75),
        values=values,
        modality=Modality.CT,
    )


def make_phantom_set(
    set_id: str,
    provenance: str,
    n_volumes: int = 2,
    slices_per_volume: int = 30,
    seed: int = 7,
    rows: int = 64,
    cols: int = 64,
    noise_sigma: float = 0.0,
) -> ImageSet:
    rng = np.random.default_rng(seed)
    volumes = []
    for v in range(n_volumes):
        vol_id = f"{set_id}-vol{v}"
        slices = tuple(
            make_phantom_slice(vol_id, i, slices_per_volume, rng, rows, cols, noise_sigma)
            for i in range(slices_per_volume)
        )
        volumes.append((vol_id, slices))
    return ImageSet(set_id=set_id, provenance=provenance, volumes=tuple(volumes))


def degrade_set(image_set: ImageSet, sigma_fraction: float, seed: int) -> ImageSet:
    """Noise-degraded copy: adds N(0, sigma_fraction * HU span) per pixel."""
    from dataclasses import replace

    rng = np.random.default_rng(seed)
    sigma = sigma_fraction * (HU_HI - HU_LO)
    volumes = []
    for vol_id, slices in image_set.volumes:
        noisy = []
        for s in slices:
            values = s.values + (rng.normal(0.0, sigma, size=s.values.shape) if sigma > 0 else 0.0)
            noisy.append(replace(s, values=np.clip(values, HU_LO, HU_HI)))
        volumes.append((vol_id, tuple(noisy)))
    return replace(image_set, set_id=image_set.set_id + f"-noise{sigma_fraction}",
                   provenance="synthetic", volumes=tuple(volumes))


def block_mean_features(image_set: ImageSet, block: int = 16):
    """Cheap deterministic per-slice embedding: block-mean pooling."""
    from synthct_eval.frechet import FeatureMatrix

    rows_list = []
    ids = []
    for s in image_set.iter_slices():
        r, c = s.values.shape
        pooled = s.values.reshape(r // block, block, c // block, block).mean(axis=(1, 3))
        rows_list.append(pooled.ravel())
        ids.append(s.key)
    return FeatureMatrix(data=np.array(rows_list), ids=tuple(ids))


def write_manifest(image_set: ImageSet, directory: Path, layers: dict | None = None) -> Path:
    """Persist a set as PGM slices + manifest JSON; returns manifest path."""
    directory.mkdir(parents=True, exist_ok=True)
    volumes = []
    for vol_id, slices in image_set.volumes:
        entries = []
        for s in slices:
            name = f"{vol_id}_{s.slice_index:03d}.pgm"
            save_portable_slice(s, directory / name, image_set.hu_range)
            entry = {"path": name, "slice_index": s.slice_index}
            key = s.key
            if layers and key in layers:
                entry["layer"] = layers[key]
            entries.append(entry)
        volumes.append({"volume_id": vol_id, "slices": entries})
    manifest = {
        "set_id": image_set.set_id,
        "provenance": image_set.provenance,
        "hu_range": list(image_set.hu_range),
        "contrast_enhanced": image_set.contrast_enhanced,
        "volumes": volumes,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


# ---------------------------------------------------------------------------
# DICOM byte crafting (layout written by hand, independent of the parser)
# ---------------------------------------------------------------------------

EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"
IMPLICIT_VR_LE = "1.2.840.10008.1.2"

_SHORT_VR = {"US", "DS", "CS", "UI", "UL", "LO"}


def _element(group: int, elem: int, vr: str, value: bytes) -> bytes:
    if len(value) % 2:
        pad = b"\x00" if vr == "UI" else b" "
        value += pad
    head = struct.pack("<HH", group, elem) + vr.encode("ascii")
    if vr in _SHORT_VR:
        return head + struct.pack("<H", len(value)) + value
    return head + b"\x00\x00" + struct.pack("<I", len(value)) + value


def craft_dicom(
    pixels: np.ndarray,
    slope: float = 1.0,
    intercept: float = -1024.0,
    modality: str = "CT",
    transfer_syntax: str = EXPLICIT_VR_LE,
    signed: bool = False,
    pixel_spacing: str | None = "0.75\\0.75",
    omit: tuple[str, ...] = (),
) -> bytes:
    """Assemble a part-10 DICOM file byte by byte."""
    rows, cols = pixels.shape
    dtype = "<i2" if signed else "<u2"
    body = b""
    body += _element(0x0002, 0x0010, "UI", transfer_syntax.encode("ascii"))
    if "modality" not in omit:
        body += _element(0x0008, 0x0060, "CS", modality.encode("ascii"))
    if "rows" not in omit:
        body += _element(0x0028, 0x0010, "US", struct.pack("<H", rows))
    if "cols" not in omit:
        body += _element(0x0028, 0x0011, "US", struct.pack("<H", cols))
    if pixel_spacing is not None:
        body += _element(0x0028, 0x0030, "DS", pixel_spacing.encode("ascii"))
    body += _element(0x0028, 0x0100, "US", struct.pack("<H", 16))
    body += _element(0x0028, 0x0103, "US", struct.pack("<H", 1 if signed else 0))
    if "intercept" not in omit:
        body += _element(0x0028, 0x1052, "DS", f"{intercept:g}".encode("ascii"))
    if "slope" not in omit:
        body += _element(0x0028, 0x1053, "DS", f"{slope:g}".encode("ascii"))
    if "pixeldata" not in omit:
        body += _element(0x7FE0, 0x0010, "OW", pixels.astype(dtype).tobytes())
    return b"\x00" * 128 + b"DICM" + body


@pytest.fixture
def rng():
    return np.random.default_rng(20240 + 1)
