"""Centered log-magnitude spectra and spectrum correlation.

Upsampling layers in image-to-image generators leave periodic traces
(checkerboard peaks) that are much easier to score in the frequency
domain than in pixel space. Slices are mean-subtracted, zero-padded to
power-of-two dimensions, transformed, and compressed with log(1 + |X|);
set-level comparison correlates per-layer average spectra.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDistribution, InvalidParameter
from .imaging import SliceImage, _write_json, _write_pgm16, round_half_away


@dataclass(frozen=True)
class Spectrum:
    """Non-negative log-magnitude spectrum with DC shifted to the center."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidParameter(f"spectrum must be 2-D, got shape {values.shape}")
        if not (_is_pow2(values.shape[0]) and _is_pow2(values.shape[1])):
            raise InvalidParameter(
                f"spectrum dimensions must be powers of two, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("spectrum contains non-finite values")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def fft2d(values: np.ndarray) -> np.ndarray:
    """Forward 2-D DFT, unnormalized; dimensions must be powers of two."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidParameter(f"expected a 2-D array, got shape {values.shape}")
    if not (_is_pow2(values.shape[0]) and _is_pow2(values.shape[1])):
        raise InvalidParameter(
            f"dimensions must be powers of two (zero-pad first), got {values.shape}"
        )
    return np.fft.fft2(values)


def ifft2d(values: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT with the 1/(rows*cols) factor."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise InvalidParameter(f"expected a 2-D array, got shape {values.shape}")
    if not (_is_pow2(values.shape[0]) and _is_pow2(values.shape[1])):
        raise InvalidParameter(
            f"dimensions must be powers of two (zero-pad first), got {values.shape}"
        )
    return np.fft.ifft2(values)


def to_spectrum(img: SliceImage | np.ndarray, shape: tuple[int, int] | None = None) -> Spectrum:
    """Centered log-magnitude spectrum of one slice.

    Steps: subtract the mean, zero-pad to power-of-two dimensions (the
    next power of two per axis unless a fixed target is given), DFT,
    magnitude, shift DC to the center, log(1 + M). Padding a mean-
    subtracted image with zeros keeps the padded border neutral.
    """
    values = img.values if isinstance(img, SliceImage) else np.asarray(img, dtype=np.float64)
    rows, cols = values.shape
    if shape is None:
        shape = (next_pow2(rows), next_pow2(cols))
    if shape[0] < rows or shape[1] < cols:
        raise InvalidParameter(f"pad target {shape} smaller than image {values.shape}")
    padded = np.zeros(shape, dtype=np.float64)
    padded[:rows, :cols] = values - values.mean()
    magnitude = np.abs(fft2d(padded))
    return Spectrum(values=np.log1p(np.fft.fftshift(magnitude)))


def average_spectrum(specs: list[Spectrum]) -> Spectrum:
    """Element-wise mean of spectra sharing one padded size."""
    if not specs:
        raise InvalidParameter("cannot average an empty spectrum list")
    shape = specs[0].values.shape
    for s in specs[1:]:
        if s.values.shape != shape:
            raise InvalidParameter(
                f"spectrum dimensions differ: {s.values.shape} vs {shape}"
            )
    return Spectrum(values=np.mean([s.values for s in specs], axis=0))


def spectrum_correlation(a: Spectrum, b: Spectrum) -> float:
    """Pearson correlation over all spectrum cells."""
    if a.values.shape != b.values.shape:
        raise InvalidParameter(
            f"spectrum dimensions differ: {a.values.shape} vs {b.values.shape}"
        )
    da = a.values.ravel() - a.values.mean()
    db = b.values.ravel() - b.values.mean()
    ssa = float(np.sum(da * da))
    ssb = float(np.sum(db * db))
    if ssa == 0.0 or ssb == 0.0:
        raise DegenerateDistribution("spectrum correlation undefined for a flat spectrum")
    return float(np.sum(da * db) / np.sqrt(ssa * ssb))


def save_spectrum(spec: Spectrum, path: str | Path) -> None:
    """Export a spectrum as 16-bit PGM for visual inspection.

    Values are scaled linearly onto [0, 65535]; the scale is recorded in
    the sidecar so the export is invertible.
    """
    path = Path(path)
    vmax = float(spec.values.max())
    if vmax > 0:
        raw = round_half_away(spec.values / vmax * 65535.0)
    else:
        raw = np.zeros_like(spec.values)
    _write_pgm16(path, np.clip(raw, 0, 65535).astype(np.uint16))
    _write_json(
        path.with_name(path.name + ".json"),
        {"kind": "spectrum", "scale": {"min": 0.0, "max": vmax}},
    )
