"""Gaussian summaries of feature embeddings and the Fréchet distance.

The embedding network itself stays outside this package: features arrive
in a small binary file (see FEATURE_MAGIC below) written by an exporter,
which also records a description of the extractor in the JSON sidecar so
every score is traceable to its embedding.

The trace term is evaluated in the symmetric form
Tr((C^{1/2} C_w C^{1/2})^{1/2}), which equals the textbook Tr((C C_w)^{1/2})
but keeps every decomposition inside real symmetric eigenproblems.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientSamples,
    InvalidParameter,
    MalformedInput,
    MissingFeature,
    NotPositiveSemidefinite,
)

FEATURE_MAGIC = b"FEAT"
FEATURE_VERSION = 1
DEFAULT_FRECHET_EPS = 1e-6

_SYMMETRY_RTOL = 1e-10
_PSD_EIGENVALUE_TOL = -1e-6  # times trace; below this the matrix is rejected


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d feature embeddings with one id per row."""

    data: np.ndarray
    ids: tuple[str, ...]
    extractor_desc: str | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidParameter(f"feature data must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidParameter("feature data contains non-finite rows")
        if len(self.ids) != data.shape[0]:
            raise InvalidParameter(
                f"{len(self.ids)} ids for {data.shape[0]} feature rows"
            )
        object.__setattr__(self, "data", data)
        data.setflags(write=False)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def select(self, ids: list[str]) -> "FeatureMatrix":
        """Rows for the given ids, in the given order."""
        index = {fid: i for i, fid in enumerate(self.ids)}
        rows = []
        for fid in ids:
            if fid not in index:
                raise MissingFeature(f"no feature row for slice {fid!r}")
            rows.append(index[fid])
        return FeatureMatrix(
            data=self.data[rows].copy(),
            ids=tuple(ids),
            extractor_desc=self.extractor_desc,
        )


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix of a feature distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidParameter(
                f"mean shape {mean.shape} and cov shape {cov.shape} are inconsistent"
            )
        scale = np.linalg.norm(cov) or 1.0
        if np.linalg.norm(cov - cov.T) > _SYMMETRY_RTOL * scale:
            raise InvalidParameter("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        mean.setflags(write=False)
        cov.setflags(write=False)

    @property
    def d(self) -> int:
        return self.mean.size


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_features(f: FeatureMatrix, path: str | Path) -> None:
    """Write the binary feature file plus its JSON id sidecar."""
    path = Path(path)
    header = FEATURE_MAGIC + struct.pack("<IQQ", FEATURE_VERSION, f.n, f.d)
    payload = np.ascontiguousarray(f.data, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    sidecar = {"ids": list(f.ids)}
    if f.extractor_desc is not None:
        sidecar["extractor_desc"] = f.extractor_desc
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_features(path: str | Path) -> FeatureMatrix:
    """Load a FEAT binary file and its sidecar.

    Layout (little endian): magic "FEAT", version u32, n u64, d u64,
    then n*d float32 values row-major. The sidecar <file>.json holds
    {"ids": [...]} with exactly n entries (row i belongs to ids[i]) and
    optionally "extractor_desc".
    """
    path = Path(path)
    if not path.is_file():
        raise MalformedInput(f"{path}: no such file")
    buf = path.read_bytes()
    if len(buf) < 24:
        raise MalformedInput(f"{path}: too short for a feature file header")
    if buf[:4] != FEATURE_MAGIC:
        raise MalformedInput(f"{path}: bad magic {buf[:4]!r}, expected {FEATURE_MAGIC!r}")
    version, n, d = struct.unpack_from("<IQQ", buf, 4)
    if version != FEATURE_VERSION:
        raise MalformedInput(f"{path}: unsupported feature file version {version}")
    if n == 0 or d == 0:
        raise MalformedInput(f"{path}: empty payload (n={n}, d={d})")
    expected = 24 + n * d * 4
    if len(buf) != expected:
        raise MalformedInput(
            f"{path}: payload length {len(buf) - 24} bytes does not match n*d = {n}*{d}"
        )
    data = np.frombuffer(buf, dtype="<f4", offset=24).reshape(n, d).astype(np.float64)

    sidecar = _sidecar_path(path)
    if not sidecar.is_file():
        raise MalformedInput(f"{path}: missing sidecar {sidecar.name}")
    meta = json.loads(sidecar.read_text())
    ids = meta.get("ids")
    if not isinstance(ids, list) or len(ids) != n:
        raise MalformedInput(f"{sidecar}: ids must be a list of exactly {n} entries")
    return FeatureMatrix(
        data=data, ids=tuple(str(i) for i in ids), extractor_desc=meta.get("extractor_desc")
    )


def fit_gaussian(f: FeatureMatrix) -> GaussianSummary:
    """Column means and unbiased (n-1) sample covariance, symmetrized."""
    if f.n < 2:
        raise InsufficientSamples(f"need >= 2 samples to fit a Gaussian, got {f.n}")
    mean = f.data.mean(axis=0)
    centered = f.data - mean
    cov = centered.T @ centered / (f.n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianSummary(mean=mean, cov=cov)


def sqrt_spd(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in the small negative band tolerated as numerical noise
    are clamped to 0; anything below -1e-6 * trace raises
    NotPositiveSemidefinite.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameter(f"expected a square matrix, got shape {a.shape}")
    scale = np.linalg.norm(a) or 1.0
    if np.linalg.norm(a - a.T) > _SYMMETRY_RTOL * scale:
        raise InvalidParameter("matrix must be symmetric to take an SPD root")
    sym = (a + a.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    tol = _PSD_EIGENVALUE_TOL * max(abs(np.trace(sym)), 1e-30)
    if eigvals.min() < tol:
        raise NotPositiveSemidefinite(
            f"eigenvalue {eigvals.min():.3e} below tolerance {tol:.3e}"
        )
    root = eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return (root + root.T) / 2.0


def _trace_term(c1: np.ndarray, c2: np.ndarray) -> float:
    half = sqrt_spd(c1)
    inner = half @ c2 @ half
    return float(np.trace(sqrt_spd((inner + inner.T) / 2.0)))


def frechet_distance(
    g1: GaussianSummary, g2: GaussianSummary, eps: float = DEFAULT_FRECHET_EPS
) -> float:
    """Squared Fréchet (Wasserstein-2) distance between two Gaussians.

    ||m1 - m2||^2 + Tr(C1) + Tr(C2) - 2 Tr((C1^{1/2} C2 C1^{1/2})^{1/2});
    if the trace term is numerically indefinite, eps is added to both
    covariance diagonals and the term recomputed. Result clamped at 0.
    """
    if g1.d != g2.d:
        raise InvalidParameter(f"dimension mismatch: {g1.d} vs {g2.d}")
    if eps < 0:
        raise InvalidParameter(f"eps must be >= 0, got {eps}")
    if np.array_equal(g1.mean, g2.mean) and np.array_equal(g1.cov, g2.cov):
        # exact identity; the trace cancellation below would otherwise leave
        # noise of order eps_machine * Tr(C) * cond(C)
        return 0.0
    mean_term = float(np.sum((g1.mean - g2.mean) ** 2))
    try:
        trace_cross = _trace_term(g1.cov, g2.cov)
    except NotPositiveSemidefinite:
        if eps == 0:
            raise
        bump = eps * np.eye(g1.d)
        trace_cross = _trace_term(g1.cov + bump, g2.cov + bump)
    value = mean_term + float(np.trace(g1.cov) + np.trace(g2.cov)) - 2.0 * trace_cross
    return max(value, 0.0)


def fid_between_sets(
    real_features: FeatureMatrix,
    synth_features: FeatureMatrix,
    eps: float = DEFAULT_FRECHET_EPS,
) -> float:
    """Fréchet distance between Gaussians fitted to the two feature sets.

    Lower is closer; 0 means the fitted distributions coincide.
    """
    if real_features.d != synth_features.d:
        raise InvalidParameter(
            f"feature dimension mismatch: {real_features.d} vs {synth_features.d}"
        )
    return frechet_distance(fit_gaussian(real_features), fit_gaussian(synth_features), eps)
