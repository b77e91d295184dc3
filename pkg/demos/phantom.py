"""Shared helper for the demo scripts: a tiny synthetic CT generator.

Not a fixture of the library itself, just enough anatomy-like structure
(air background, soft-tissue body, bone rim, a growing organ) to make the
metrics produce interesting numbers without any patient data.
"""

import numpy as np

from synthct_eval import ImageSet, Modality, SliceImage

HU_LO, HU_HI = -1024.0, 3071.0


def phantom_slice(volume_id, index, n_slices, rng, size=64, noise_hu=0.0):
    t = index / max(n_slices - 1, 1)
    yy, xx = np.mgrid[0:size, 0:size]
    c = size / 2.0
    ry = size * (0.30 + 0.08 * np.sin(np.pi * t) + rng.uniform(-0.03, 0.03))
    rx = size * (0.36 + 0.06 * np.sin(np.pi * t) + rng.uniform(-0.03, 0.03))
    r2 = ((yy - c) / ry) ** 2 + ((xx - c) / rx) ** 2

    values = np.full((size, size), -1000.0)
    body = r2 <= 1.0
    values[body] = 40.0 + rng.normal(0, 15, int(body.sum()))
    rim = body & (r2 >= rng.uniform(0.78, 0.86))
    values[rim] = 700.0 + rng.normal(0, 40, int(rim.sum()))
    organ = ((yy - c * 0.8) ** 2 + (xx - c * 1.2) ** 2) <= (size * 0.1 * (1 - 0.6 * t)) ** 2
    values[organ & body] = 90.0 + rng.normal(0, 10, int((organ & body).sum()))

    if noise_hu > 0:
        values = values + rng.normal(0, noise_hu, values.shape)
    return SliceImage(
        volume_id=volume_id,
        slice_index=index,
        rows=size,
        cols=size,
        pixel_spacing=(0.75, 0.75),
        values=np.clip(values, HU_LO, HU_HI),
        modality=Modality.CT,
    )


def phantom_set(set_id, provenance, n_volumes=2, n_slices=30, seed=0, noise_hu=0.0):
    rng = np.random.default_rng(seed)
    volumes = []
    for v in range(n_volumes):
        vol = f"{set_id}-vol{v}"
        volumes.append(
            (vol, tuple(phantom_slice(vol, i, n_slices, rng, noise_hu=noise_hu)
                        for i in range(n_slices)))
        )
    return ImageSet(set_id=set_id, provenance=provenance, volumes=tuple(volumes))
