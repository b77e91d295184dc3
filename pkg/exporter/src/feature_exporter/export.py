"""Backbone inference and FEAT file writing.

The binary format is written here independently of the core package
(magic "FEAT", version u32=1, n u64, d u64, n*d float32 row-major,
little endian; JSON sidecar with ids and the extractor descriptor), so a
round trip through the core's loader genuinely cross-checks the format.

Embeddings default to the 2048-wide pooled layer of Inception v3. When
no weight file is supplied the network is randomly initialized from a
fixed seed: embeddings are then only meaningful relative to each other,
and the descriptor records exactly that, so any FID computed from the
files stays traceable to its extractor.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.nn.functional import interpolate

from synthct_eval.imaging import ImageSet, load_manifest

FEATURE_MAGIC = b"FEAT"
FEATURE_VERSION = 1

_INIT_SEED = 0


@dataclass(frozen=True)
class ExtractorDescriptor:
    """Everything needed to reproduce (or refuse to compare) an embedding."""

    network: str = "inception_v3"
    layer: str = "avgpool-2048"
    resize: int = 299
    channels: str = "replicate-gray-to-3"
    normalization: str = "unit-range,mean=0.5,std=0.5"
    weights: str = f"random-init-seed-{_INIT_SEED}"
    d: int = 2048

    def to_string(self) -> str:
        return (
            f"{self.network}/{self.layer};resize={self.resize};"
            f"channels={self.channels};norm={self.normalization};"
            f"weights={self.weights};d={self.d}"
        )


def build_backbone(weights_path: str | Path | None = None) -> torch.nn.Module:
    """Inception v3 with the classifier head replaced by identity."""
    from torchvision.models import inception_v3

    torch.manual_seed(_INIT_SEED)
    model = inception_v3(weights=None, init_weights=True, aux_logits=False,
                         transform_input=False)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu")
        model.load_state_dict(state, strict=False)
    model.fc = torch.nn.Identity()
    model.eval()
    return model


def _preprocess(image_set: ImageSet, resize: int) -> tuple[torch.Tensor, list[str]]:
    """Scale slices to [0,1] over the set's HU range, resize, replicate channels."""
    lo, hi = image_set.hu_range
    tensors, ids = [], []
    for s in image_set.iter_slices():
        if s.modality.is_ct:
            unit = (s.values - lo) / (hi - lo)
        else:
            unit = s.values  # MRI is already min-max normalized per volume
        x = torch.from_numpy(np.ascontiguousarray(unit, dtype=np.float32))
        x = interpolate(
            x[None, None], size=(resize, resize), mode="bilinear", align_corners=False
        )[0]
        x = (x - 0.5) / 0.5
        tensors.append(x.expand(3, -1, -1))
        ids.append(s.key)
    return torch.stack(tensors), ids


def _write_feat(path: Path, data: np.ndarray, ids: list[str], descriptor: str) -> None:
    n, d = data.shape
    header = FEATURE_MAGIC + struct.pack("<IQQ", FEATURE_VERSION, n, d)
    path.write_bytes(header + np.ascontiguousarray(data, dtype="<f4").tobytes())
    sidecar = {"ids": ids, "extractor_desc": descriptor}
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    )


def export_features(
    manifest: str | Path,
    out: str | Path,
    weights: str | Path | None = None,
    batch_size: int = 8,
    descriptor: ExtractorDescriptor | None = None,
) -> np.ndarray:
    """Embed every slice of a manifest and write the FEAT file + sidecar.

    Row order equals manifest order; inference runs single-threaded in
    no-grad mode so repeated exports are bit-identical. On any failure the
    partial output is removed. Returns the float32 feature matrix.
    """
    out = Path(out)
    descriptor = descriptor or ExtractorDescriptor(
        weights=str(weights) if weights else f"random-init-seed-{_INIT_SEED}"
    )
    n_threads = torch.get_num_threads()
    try:
        torch.set_num_threads(1)  # fixed reduction order across runs
        image_set = load_manifest(manifest)
        model = build_backbone(weights)
        batch, ids = _preprocess(image_set, descriptor.resize)
        chunks = []
        with torch.no_grad():
            for start in range(0, batch.shape[0], batch_size):
                chunks.append(model(batch[start : start + batch_size]).numpy())
        data = np.concatenate(chunks, axis=0).astype(np.float32)
        if data.shape != (len(ids), descriptor.d):
            raise RuntimeError(
                f"backbone produced shape {data.shape}, expected ({len(ids)}, {descriptor.d})"
            )
        _write_feat(out, data, ids, descriptor.to_string())
        return data
    except BaseException:
        out.unlink(missing_ok=True)
        Path(str(out) + ".json").unlink(missing_ok=True)
        raise
    finally:
        torch.set_num_threads(n_threads)
