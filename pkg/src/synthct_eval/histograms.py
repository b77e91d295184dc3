"""Intensity histograms and the three histogram similarity scores.

Set-level distributions are built by averaging per-image histogram
densities; the similarity scores (KL divergence, correlation,
intersection) operate on those density vectors so sets of different
sizes stay comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDistribution, InvalidParameter
from .imaging import DEFAULT_HU_RANGE, SliceImage

KL_EPSILON = 1e-12


@dataclass(frozen=True)
class Histogram:
    """Binned intensity distribution: counts plus a density vector.

    For histograms built from pixel data, density = counts / sum(counts).
    Averaged histograms carry the mean of their input densities instead
    (counts stay the element-wise sum), so unequal image sizes do not
    reweight the average.
    """

    n_bins: int
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if self.n_bins < 1:
            raise InvalidParameter(f"n_bins must be >= 1, got {self.n_bins}")
        if edges.shape != (self.n_bins + 1,):
            raise InvalidParameter(
                f"expected {self.n_bins + 1} edges, got shape {edges.shape}"
            )
        if np.any(np.diff(edges) <= 0):
            raise InvalidParameter("histogram edges must be strictly increasing")
        if counts.shape != (self.n_bins,) or np.any(counts < 0):
            raise InvalidParameter("counts must be n_bins non-negative integers")
        density = self.density
        if density is None:
            total = counts.sum()
            density = counts / total if total > 0 else np.zeros(self.n_bins)
        density = np.asarray(density, dtype=np.float64)
        if density.shape != (self.n_bins,) or np.any(density < 0):
            raise InvalidParameter("density must be n_bins non-negative reals")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "density", density)
        for arr in (self.edges, self.counts, self.density):
            arr.setflags(write=False)

    def same_binning(self, other: "Histogram") -> bool:
        return self.n_bins == other.n_bins and np.array_equal(self.edges, other.edges)

    def to_json(self) -> dict:
        """Serializable form; density is recomputed on load."""
        return {
            "n_bins": self.n_bins,
            "edges": [float(e) for e in self.edges],
            "counts": [int(c) for c in self.counts],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Histogram":
        return cls(
            n_bins=int(doc["n_bins"]),
            edges=np.asarray(doc["edges"], dtype=np.float64),
            counts=np.asarray(doc["counts"], dtype=np.int64),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Histogram":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TissueBinning:
    """Two HU cut points splitting the full range into gas/liquid, soft
    tissue, and bone bins."""

    t1: float = -200.0
    t2: float = 200.0
    hu_range: tuple[float, float] = DEFAULT_HU_RANGE

    def __post_init__(self):
        lo, hi = self.hu_range
        if not lo < self.t1 < self.t2 < hi:
            raise InvalidParameter(
                f"tissue thresholds must satisfy {lo} < t1 < t2 < {hi}, "
                f"got t1={self.t1}, t2={self.t2}"
            )

    @property
    def edges(self) -> np.ndarray:
        lo, hi = self.hu_range
        return np.array([lo, self.t1, self.t2, hi], dtype=np.float64)


def image_histogram(
    img: SliceImage | np.ndarray,
    n_bins: int,
    value_range: tuple[float, float],
) -> Histogram:
    """Histogram of one slice over [lo, hi] with uniform bins.

    Values outside the range are clamped into the end bins, so counts
    always sum to rows * cols.
    """
    if n_bins < 1:
        raise InvalidParameter(f"n_bins must be >= 1, got {n_bins}")
    lo, hi = value_range
    if not lo < hi:
        raise InvalidParameter(f"range must satisfy lo < hi, got [{lo}, {hi}]")
    values = img.values if isinstance(img, SliceImage) else np.asarray(img, dtype=np.float64)
    if values.size == 0:
        raise InvalidParameter("cannot histogram an empty slice")

    idx = np.floor((values.ravel() - lo) / (hi - lo) * n_bins)
    idx = np.clip(idx, 0, n_bins - 1).astype(np.int64)
    counts = np.bincount(idx, minlength=n_bins)
    edges = np.linspace(lo, hi, n_bins + 1)
    return Histogram(n_bins=n_bins, edges=edges, counts=counts)


def tissue_histogram(img: SliceImage, binning: TissueBinning | None = None) -> Histogram:
    """3-bin radio-opacity histogram of a CT slice.

    Bins: [hu_lo, t1) gas and liquid, [t1, t2) soft tissue, [t2, hu_hi]
    bone. Values outside the HU range are clamped into the end bins.
    """
    if binning is None:
        binning = TissueBinning()
    if not img.modality.is_ct:
        raise InvalidParameter(
            f"slice {img.key}: tissue bins are HU-defined; got modality "
            f"{img.modality.value}"
        )
    values = img.values.ravel()
    idx = np.searchsorted(np.array([binning.t1, binning.t2]), values, side="right")
    counts = np.bincount(idx, minlength=3)
    return Histogram(n_bins=3, edges=binning.edges, counts=counts)


def average_histogram(hists: list[Histogram]) -> Histogram:
    """Set-level average: mean of densities, element-wise sum of counts."""
    if not hists:
        raise InvalidParameter("cannot average an empty histogram list")
    first = hists[0]
    for h in hists[1:]:
        if not first.same_binning(h):
            raise InvalidParameter("histograms must share n_bins and edges to average")
    counts = np.sum([h.counts for h in hists], axis=0)
    density = np.mean([h.density for h in hists], axis=0)
    return Histogram(n_bins=first.n_bins, edges=first.edges, counts=counts, density=density)


def _check_binning(h1: Histogram, h2: Histogram) -> None:
    if not h1.same_binning(h2):
        raise InvalidParameter("histograms must share n_bins and edges")


def kl_divergence(p: Histogram, q: Histogram, epsilon: float = KL_EPSILON) -> float:
    """Divergence of density q from reference density p, in nats.

    Both densities get epsilon added to every bin and are renormalized
    before the sum, so empty bins cannot produce infinities. Asymmetric
    by definition; >= 0 up to ~1e-12 and exactly 0 for p == q.
    """
    _check_binning(p, q)
    if epsilon <= 0:
        raise InvalidParameter(f"epsilon must be > 0, got {epsilon}")
    ps = p.density + epsilon
    qs = q.density + epsilon
    ps /= ps.sum()
    qs /= qs.sum()
    return float(np.sum(ps * np.log(ps / qs)))


def hist_correlation(h1: Histogram, h2: Histogram) -> float:
    """Pearson correlation of the two density vectors; 1.0 for a perfect
    match, -1.0 for perfect anti-correlation."""
    _check_binning(h1, h2)
    d1 = h1.density - h1.density.mean()
    d2 = h2.density - h2.density.mean()
    ss1 = float(np.sum(d1 * d1))
    ss2 = float(np.sum(d2 * d2))
    if ss1 == 0.0 or ss2 == 0.0:
        raise DegenerateDistribution(
            "histogram correlation undefined for a constant density"
        )
    return float(np.sum(d1 * d2) / np.sqrt(ss1 * ss2))


def hist_intersection(h1: Histogram, h2: Histogram) -> float:
    """Sum of bin-wise minima of the densities; 1.0 iff identical."""
    _check_binning(h1, h2)
    return float(np.sum(np.minimum(h1.density, h2.density)))
