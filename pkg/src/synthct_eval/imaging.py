"""Loading, calibration, windowing, and axial-layer partitioning of 2-D slices.

CT slices are calibrated to Hounsfield units and clamped to a configured HU
range; MRI slices are min-max normalized per volume to [0, 1] at set load
time (MRI has no absolute intensity scale). Every downstream metric assumes
data produced here.

Two on-disk slice formats are supported:

* a deliberate DICOM subset: uncompressed, explicit VR, little endian.
  Anything else is rejected loudly rather than half-parsed.
* a portable 16-bit grayscale PGM paired with a JSON sidecar declaring
  modality and calibration (used for fixtures and spectra export).
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidParameter, MalformedInput, UnsupportedEncoding

N_LAYERS = 10
DEFAULT_HU_RANGE = (-1024.0, 3071.0)

EXPLICIT_VR_LITTLE_ENDIAN = "1.2.840.10008.1.2.1"


class Modality(enum.Enum):
    CT = "CT"
    MR_T1_IP = "MR_T1_IP"
    MR_T1_OOP = "MR_T1_OOP"
    MR_T2 = "MR_T2"

    @property
    def is_ct(self) -> bool:
        return self is Modality.CT


def slice_key(volume_id: str, slice_index: int) -> str:
    """Canonical identifier of one slice, used by layer maps and feature ids."""
    return f"{volume_id}/{slice_index}"


@dataclass(frozen=True)
class SliceImage:
    """One axial slice in physical units (HU for CT).

    ``values`` is a rows x cols float64 array. Instances are immutable and
    safe to share across threads.
    """

    volume_id: str
    slice_index: int
    rows: int
    cols: int
    pixel_spacing: tuple[float, float]
    values: np.ndarray
    modality: Modality
    contrast_enhanced: bool = False

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidParameter(
                f"slice {self.key}: rows and cols must be >= 1, got {self.rows}x{self.cols}"
            )
        if self.values.shape != (self.rows, self.cols):
            raise InvalidParameter(
                f"slice {self.key}: values shape {self.values.shape} "
                f"does not match {self.rows}x{self.cols}"
            )
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter(f"slice {self.key}: non-finite pixel values")
        self.values.setflags(write=False)

    @property
    def key(self) -> str:
        return slice_key(self.volume_id, self.slice_index)


@dataclass(frozen=True)
class IngestConfig:
    """Per-slice ingestion parameters supplied by the manifest loader."""

    volume_id: str
    slice_index: int
    modality: Modality | None = None
    hu_range: tuple[float, float] = DEFAULT_HU_RANGE
    contrast_enhanced: bool = False


@dataclass(frozen=True)
class ImageSet:
    """A manifest-described collection of slices grouped by volume.

    ``layers`` maps slice keys to layer ids in [1, 10] once
    :func:`assign_layers` has run; it is None before that.
    """

    set_id: str
    provenance: str
    volumes: tuple[tuple[str, tuple[SliceImage, ...]], ...]
    hu_range: tuple[float, float] = DEFAULT_HU_RANGE
    contrast_enhanced: bool = False
    layers: dict[str, int] | None = None
    layer_overrides: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("real", "synthetic"):
            raise MalformedInput(
                f"set {self.set_id}: provenance must be 'real' or 'synthetic', "
                f"got {self.provenance!r}"
            )

    def iter_slices(self):
        for _, slices in self.volumes:
            yield from slices

    @property
    def n_slices(self) -> int:
        return sum(len(slices) for _, slices in self.volumes)

    def layer_of(self, img: SliceImage) -> int:
        if self.layers is None:
            raise InvalidParameter(f"set {self.set_id}: layers not assigned yet")
        return self.layers[img.key]

    def slices_in_layer(self, layer: int) -> list[SliceImage]:
        return [s for s in self.iter_slices() if self.layer_of(s) == layer]


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero (0.5 -> 1, -0.5 -> -1), elementwise.

    numpy's round() is half-to-even; every integer output in this package
    goes through this helper so results are bit-reproducible.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.trunc(x + np.copysign(0.5, x))


def window_to_8bit(img: SliceImage | np.ndarray, center: float, width: float) -> np.ndarray:
    """Map physical values to display gray levels in [0, 255].

    g = clamp(round((v - (center - width/2)) / width * 255), 0, 255)
    """
    if width <= 0:
        raise InvalidParameter(f"window width must be > 0, got {width}")
    values = img.values if isinstance(img, SliceImage) else np.asarray(img, dtype=np.float64)
    lo = center - width / 2.0
    g = (values - lo) / width * 255.0
    g = round_half_away(g)
    return np.clip(g, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# DICOM subset parser (uncompressed, explicit VR, little endian)
# ---------------------------------------------------------------------------

_TAG_MODALITY = (0x0008, 0x0060)
_TAG_ROWS = (0x0028, 0x0010)
_TAG_COLS = (0x0028, 0x0011)
_TAG_PIXEL_SPACING = (0x0028, 0x0030)
_TAG_BITS_ALLOCATED = (0x0028, 0x0100)
_TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
_TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
_TAG_RESCALE_SLOPE = (0x0028, 0x1053)
_TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
_TAG_PIXEL_DATA = (0x7FE0, 0x0010)

# VRs whose explicit encoding uses a 2-byte reserved field + 4-byte length
_LONG_VRS = {b"OB", b"OW", b"OF", b"SQ", b"UT", b"UN"}


def _read_elements(buf: bytes, offset: int, path: Path):
    """Yield (tag, vr, value_bytes) for explicit-VR-LE elements in buf."""
    n = len(buf)
    while offset < n:
        if offset + 8 > n:
            raise MalformedInput(f"{path}: truncated element header at byte {offset}")
        group, elem = struct.unpack_from("<HH", buf, offset)
        vr = buf[offset + 4 : offset + 6]
        if not (vr.isalpha() and vr.isupper()):
            raise UnsupportedEncoding(
                f"{path}: tag ({group:04X},{elem:04X}) is not explicit-VR encoded; "
                "only explicit VR little endian is supported"
            )
        if vr in _LONG_VRS:
            if offset + 12 > n:
                raise MalformedInput(f"{path}: truncated long-VR header at byte {offset}")
            (length,) = struct.unpack_from("<I", buf, offset + 8)
            value_start = offset + 12
        else:
            (length,) = struct.unpack_from("<H", buf, offset + 6)
            value_start = offset + 8
        if length == 0xFFFFFFFF:
            raise UnsupportedEncoding(
                f"{path}: tag ({group:04X},{elem:04X}) has undefined length "
                "(encapsulated or sequence data), outside the supported subset"
            )
        if value_start + length > n:
            raise MalformedInput(
                f"{path}: tag ({group:04X},{elem:04X}) value overruns the file"
            )
        yield (group, elem), vr, buf[value_start : value_start + length]
        offset = value_start + length


def _decode_ds(raw: bytes, path: Path, tag_name: str) -> float:
    try:
        return float(raw.decode("ascii").strip().strip("\x00"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise MalformedInput(f"{path}: cannot parse {tag_name}: {raw!r}") from exc


def load_dicom_slice(path: str | Path, config: IngestConfig) -> SliceImage:
    """Load one slice from the supported DICOM subset.

    CT pixel values are returned as raw * RescaleSlope + RescaleIntercept
    (HU), clamped to config.hu_range. MRI values pass through unchanged;
    per-volume normalization happens at set load time.
    """
    path = Path(path)
    if not path.is_file():
        raise MalformedInput(f"{path}: no such file")
    buf = path.read_bytes()
    if len(buf) < 132 or buf[128:132] != b"DICM":
        raise MalformedInput(f"{path}: missing DICM marker; not a DICOM part-10 file")

    elements = {}
    pixel_data = None
    syntax_seen = False
    for tag, vr, value in _read_elements(buf, 132, path):
        if tag == _TAG_TRANSFER_SYNTAX:
            syntax_seen = True
            syntax = value.decode("ascii").strip().strip("\x00")
            if syntax != EXPLICIT_VR_LITTLE_ENDIAN:
                raise UnsupportedEncoding(
                    f"{path}: transfer syntax {syntax} unsupported; only "
                    f"{EXPLICIT_VR_LITTLE_ENDIAN} (explicit VR little endian) is accepted"
                )
        if tag == _TAG_PIXEL_DATA:
            pixel_data = value
            break
        elements[tag] = value
    if not syntax_seen:
        raise MalformedInput(f"{path}: missing TransferSyntaxUID (0002,0010)")

    def require(tag, name) -> bytes:
        if tag not in elements:
            raise MalformedInput(f"{path}: missing mandatory tag {name}")
        return elements[tag]

    def decode_us(tag, name) -> int:
        raw = require(tag, name)
        if len(raw) != 2:
            raise MalformedInput(f"{path}: tag {name} must hold one 16-bit value")
        return struct.unpack("<H", raw)[0]

    rows = decode_us(_TAG_ROWS, "Rows (0028,0010)")
    cols = decode_us(_TAG_COLS, "Columns (0028,0011)")
    bits = decode_us(_TAG_BITS_ALLOCATED, "BitsAllocated (0028,0100)")
    if bits != 16:
        raise UnsupportedEncoding(f"{path}: BitsAllocated {bits} unsupported; expected 16")
    signed = False
    if _TAG_PIXEL_REPRESENTATION in elements:
        signed = decode_us(_TAG_PIXEL_REPRESENTATION, "PixelRepresentation (0028,0103)") == 1
    if pixel_data is None:
        raise MalformedInput(f"{path}: missing mandatory tag PixelData (7FE0,0010)")
    if len(pixel_data) < rows * cols * 2:
        raise MalformedInput(
            f"{path}: PixelData holds {len(pixel_data)} bytes, "
            f"expected {rows * cols * 2} for {rows}x{cols} 16-bit pixels"
        )

    dtype = np.dtype("<i2") if signed else np.dtype("<u2")
    raw = np.frombuffer(pixel_data[: rows * cols * 2], dtype=dtype).reshape(rows, cols)
    raw = raw.astype(np.float64)

    spacing = (1.0, 1.0)
    if _TAG_PIXEL_SPACING in elements:
        parts = elements[_TAG_PIXEL_SPACING].decode("ascii").strip().strip("\x00").split("\\")
        if len(parts) != 2:
            raise MalformedInput(f"{path}: PixelSpacing (0028,0030) must hold two values")
        spacing = (float(parts[0]), float(parts[1]))

    tag_modality = require(_TAG_MODALITY, "Modality (0008,0060)").decode("ascii").strip()
    modality = config.modality
    if modality is None:
        if tag_modality == "CT":
            modality = Modality.CT
        else:
            raise MalformedInput(
                f"{path}: Modality (0008,0060) is {tag_modality!r}; MR sub-modality "
                "cannot be inferred, declare it in the manifest"
            )
    if modality.is_ct and tag_modality != "CT":
        raise MalformedInput(
            f"{path}: declared modality CT but Modality (0008,0060) is {tag_modality!r}"
        )

    if modality.is_ct:
        slope = _decode_ds(
            require(_TAG_RESCALE_SLOPE, "RescaleSlope (0028,1053)"), path, "RescaleSlope"
        )
        intercept = _decode_ds(
            require(_TAG_RESCALE_INTERCEPT, "RescaleIntercept (0028,1052)"),
            path,
            "RescaleIntercept",
        )
        values = raw * slope + intercept
        values = np.clip(values, config.hu_range[0], config.hu_range[1])
    else:
        values = raw

    return SliceImage(
        volume_id=config.volume_id,
        slice_index=config.slice_index,
        rows=rows,
        cols=cols,
        pixel_spacing=spacing,
        values=values,
        modality=modality,
        contrast_enhanced=config.contrast_enhanced,
    )


# ---------------------------------------------------------------------------
# Portable slices: 16-bit PGM + JSON sidecar
# ---------------------------------------------------------------------------


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _read_pgm16(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise MalformedInput(f"{path}: not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":  # comment line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    cols, rows, maxval = fields
    if maxval != 65535:
        raise MalformedInput(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
    expected = rows * cols * 2
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise MalformedInput(f"{path}: raster holds {len(raster)} bytes, expected {expected}")
    return np.frombuffer(raster, dtype=np.dtype(">u2")).reshape(rows, cols)


def _write_pgm16(path: Path, raw: np.ndarray) -> None:
    rows, cols = raw.shape
    header = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    path.write_bytes(header + raw.astype(">u2").tobytes())


def load_portable_slice(path: str | Path) -> SliceImage:
    """Load a 16-bit PGM slice with its JSON sidecar.

    The sidecar declares modality and calibration: either
    {"slope": s, "intercept": b} (value = raw * s + b) or
    {"minmax": [lo, hi]} (value = raw / 65535 * (hi - lo) + lo).
    """
    path = Path(path)
    if not path.is_file():
        raise MalformedInput(f"{path}: no such file")
    sidecar = _sidecar_path(path)
    if not sidecar.is_file():
        raise MalformedInput(f"{path}: missing sidecar {sidecar.name}")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{sidecar}: invalid JSON: {exc}") from exc

    for key in ("modality", "calibration"):
        if key not in meta:
            raise MalformedInput(f"{sidecar}: missing field {key!r}")
    try:
        modality = Modality(meta["modality"])
    except ValueError as exc:
        raise MalformedInput(f"{sidecar}: unknown modality {meta['modality']!r}") from exc

    raw = _read_pgm16(path).astype(np.float64)
    cal = meta["calibration"]
    if "slope" in cal and "intercept" in cal:
        values = raw * float(cal["slope"]) + float(cal["intercept"])
    elif "minmax" in cal:
        lo, hi = (float(v) for v in cal["minmax"])
        values = raw / 65535.0 * (hi - lo) + lo
    else:
        raise MalformedInput(
            f"{sidecar}: calibration must hold slope/intercept or minmax, got {cal}"
        )

    rows, cols = raw.shape
    return SliceImage(
        volume_id=str(meta.get("volume_id", path.stem)),
        slice_index=int(meta.get("slice_index", 0)),
        rows=rows,
        cols=cols,
        pixel_spacing=tuple(meta.get("pixel_spacing", (1.0, 1.0))),
        values=values,
        modality=modality,
        contrast_enhanced=bool(meta.get("contrast_enhanced", False)),
    )


def save_portable_slice(
    img: SliceImage, path: str | Path, hu_range: tuple[float, float] = DEFAULT_HU_RANGE
) -> None:
    """Write a slice as 16-bit PGM + sidecar; inverse of load_portable_slice.

    CT uses a fixed linear map over hu_range so files from the same run share
    one calibration; MRI stores its own min-max. save(load(x)) is
    byte-identical for files produced here.
    """
    path = Path(path)
    if img.modality.is_ct:
        lo, hi = hu_range
        slope = (hi - lo) / 65535.0
        raw = round_half_away((img.values - lo) / slope)
        calibration = {"slope": slope, "intercept": lo}
    else:
        lo = float(img.values.min())
        hi = float(img.values.max())
        if hi > lo:
            raw = round_half_away((img.values - lo) / (hi - lo) * 65535.0)
        else:
            raw = np.zeros_like(img.values)
        calibration = {"minmax": [lo, hi]}
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    _write_pgm16(path, raw)
    _write_json(
        _sidecar_path(path),
        {
            "modality": img.modality.value,
            "calibration": calibration,
            "volume_id": img.volume_id,
            "slice_index": img.slice_index,
            "pixel_spacing": list(img.pixel_spacing),
            "contrast_enhanced": img.contrast_enhanced,
        },
    )


# ---------------------------------------------------------------------------
# Manifests and layer assignment
# ---------------------------------------------------------------------------


def _normalize_mri_volume(slices: list[SliceImage]) -> list[SliceImage]:
    """Min-max normalize an MRI volume to [0, 1] (shared scale per volume)."""
    lo = min(float(s.values.min()) for s in slices)
    hi = max(float(s.values.max()) for s in slices)
    span = hi - lo
    out = []
    for s in slices:
        values = (s.values - lo) / span if span > 0 else np.zeros_like(s.values)
        out.append(replace(s, values=values))
    return out


def load_manifest(path: str | Path) -> ImageSet:
    """Load an ImageSet from a JSON manifest.

    Schema: {set_id, provenance, hu_range:[lo,hi], contrast_enhanced?,
    volumes:[{volume_id, slices:[{path, slice_index, layer?, modality?}]}]}.
    Slice paths are resolved relative to the manifest location.
    """
    path = Path(path)
    if not path.is_file():
        raise MalformedInput(f"{path}: no such file")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: invalid JSON: {exc}") from exc

    for key in ("set_id", "provenance", "volumes"):
        if key not in doc:
            raise MalformedInput(f"{path}: missing field {key!r}")
    hu_range = tuple(float(v) for v in doc.get("hu_range", DEFAULT_HU_RANGE))
    if len(hu_range) != 2 or hu_range[0] >= hu_range[1]:
        raise MalformedInput(f"{path}: hu_range must be [lo, hi] with lo < hi")
    contrast = bool(doc.get("contrast_enhanced", False))
    base = path.parent

    volumes = []
    overrides: dict[str, int] = {}
    for vol in doc["volumes"]:
        for key in ("volume_id", "slices"):
            if key not in vol:
                raise MalformedInput(f"{path}: volume entry missing field {key!r}")
        vol_id = str(vol["volume_id"])
        if not vol["slices"]:
            raise MalformedInput(f"{path}: volume {vol_id} has no slices")
        entries = sorted(vol["slices"], key=lambda e: int(e["slice_index"]))
        indices = [int(e["slice_index"]) for e in entries]
        if len(set(indices)) != len(indices) or indices != list(
            range(indices[0], indices[0] + len(indices))
        ):
            raise MalformedInput(
                f"{path}: volume {vol_id}: slice_index values must be unique and contiguous"
            )
        slices = []
        for entry in entries:
            slice_path = base / entry["path"]
            modality = Modality(entry["modality"]) if "modality" in entry else None
            cfg = IngestConfig(
                volume_id=vol_id,
                slice_index=int(entry["slice_index"]),
                modality=modality,
                hu_range=hu_range,
                contrast_enhanced=contrast,
            )
            if slice_path.suffix.lower() == ".pgm":
                img = load_portable_slice(slice_path)
                img = replace(
                    img,
                    volume_id=vol_id,
                    slice_index=cfg.slice_index,
                    contrast_enhanced=contrast,
                )
                if modality is not None and img.modality is not modality:
                    raise MalformedInput(
                        f"{slice_path}: sidecar modality {img.modality.value} "
                        f"conflicts with manifest {modality.value}"
                    )
                if img.modality.is_ct:
                    img = replace(img, values=np.clip(img.values, hu_range[0], hu_range[1]))
            else:
                img = load_dicom_slice(slice_path, cfg)
            slices.append(img)
            if "layer" in entry:
                layer = int(entry["layer"])
                if not 1 <= layer <= N_LAYERS:
                    raise MalformedInput(
                        f"{path}: layer override {layer} for {img.key} outside [1, {N_LAYERS}]"
                    )
                overrides[img.key] = layer
        modalities = {s.modality for s in slices}
        if len(modalities) > 1:
            raise MalformedInput(
                f"{path}: volume {vol_id} mixes modalities "
                f"{sorted(m.value for m in modalities)}"
            )
        if not slices[0].modality.is_ct:
            slices = _normalize_mri_volume(slices)
        volumes.append((vol_id, tuple(slices)))

    return ImageSet(
        set_id=str(doc["set_id"]),
        provenance=str(doc["provenance"]),
        volumes=tuple(volumes),
        hu_range=hu_range,
        contrast_enhanced=contrast,
        layer_overrides=overrides,
    )


def decile_layer(rank: int, n_slices: int) -> int:
    """Layer of the rank-th slice (0-based) in an n-slice volume."""
    return min((rank * N_LAYERS) // n_slices + 1, N_LAYERS)


def assign_layers(image_set: ImageSet, overrides: dict[str, int] | None = None) -> ImageSet:
    """Assign every slice to one of the 10 axial layers.

    Default is the per-volume decile rule floor(i/n * 10) + 1 over the
    slice's rank i in slice_index order; override entries (manifest-level
    plus the explicit argument, argument winning) pin individual slices.
    """
    merged = dict(image_set.layer_overrides)
    if overrides:
        merged.update(overrides)
    known = {img.key for img in image_set.iter_slices()}
    for key, layer in merged.items():
        if key not in known:
            raise MalformedInput(f"layer override references unknown slice {key!r}")
        if not 1 <= int(layer) <= N_LAYERS:
            raise MalformedInput(f"layer override for {key!r} outside [1, {N_LAYERS}]")

    layers: dict[str, int] = {}
    for _, slices in image_set.volumes:
        ordered = sorted(slices, key=lambda s: s.slice_index)
        n = len(ordered)
        for rank, img in enumerate(ordered):
            layers[img.key] = merged.get(img.key, decile_layer(rank, n))
    return replace(image_set, layers=layers)
