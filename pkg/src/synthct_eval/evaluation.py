"""Layer-stratified evaluation of a synthetic set against a real set.

Metrics are computed between slices of the same axial layer, averaged
per layer, then optionally normalized by a baseline computed from two
disjoint real subsets: a normalized score of 1.0 reads "as close as
real data is to itself". Layers with too few slices on either side are
skipped and reported as such rather than scored on meaningless samples.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charts
from .errors import DegenerateBaseline, InvalidParameter, IoError
from .frechet import DEFAULT_FRECHET_EPS, FeatureMatrix, fid_between_sets
from .histograms import (
    KL_EPSILON,
    TissueBinning,
    average_histogram,
    hist_correlation,
    hist_intersection,
    image_histogram,
    kl_divergence,
    tissue_histogram,
)
from .imaging import DEFAULT_HU_RANGE, N_LAYERS, ImageSet, SliceImage
from .spectral import average_spectrum, next_pow2, spectrum_correlation, to_spectrum

METRICS = ("FID", "KL256", "KL3", "HistCorr", "HistInter", "SpectCorr")

REPORT_SCHEMA = 1


@dataclass(frozen=True)
class EvalConfig:
    """Knobs shared by baseline and evaluation runs; embedded in reports."""

    n_bins: int = 256
    tissue_t1: float = -200.0
    tissue_t2: float = 200.0
    hu_range: tuple[float, float] = DEFAULT_HU_RANGE
    min_slices: int = 5
    seed: int = 0
    kl_epsilon: float = KL_EPSILON
    frechet_eps: float = DEFAULT_FRECHET_EPS
    threads: int | None = None

    def snapshot(self, extractor_desc: str | None = None) -> dict:
        return {
            "n_bins": self.n_bins,
            "tissue_thresholds": [self.tissue_t1, self.tissue_t2],
            "hu_range": list(self.hu_range),
            "min_slices": self.min_slices,
            "seed": self.seed,
            "kl_epsilon": self.kl_epsilon,
            "frechet_eps": self.frechet_eps,
            "extractor_desc": extractor_desc,
        }


@dataclass(frozen=True)
class LayerScore:
    layer: int
    metric: str
    raw: float
    normalized: float | None
    n_real: int
    n_synth: int


@dataclass(frozen=True)
class BaselineTable:
    """Per-layer, per-metric real-vs-real scores used as normalizers.

    Entries are not validated at construction; compute_baseline and
    evaluate_sets both reject non-positive values where they would be
    divided by.
    """

    set_a: str
    set_b: str
    entries: dict[int, dict[str, float]]
    averages: dict[str, float]
    skipped_layers: tuple[int, ...] = ()
    config: dict = field(default_factory=dict)

    def lookup(self, layer: int, metric: str) -> float | None:
        return self.entries.get(layer, {}).get(metric)

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "kind": "baseline",
            "set_a": self.set_a,
            "set_b": self.set_b,
            "config": self.config,
            "entries": [
                {"layer": layer, "metric": metric, "raw": raw}
                for layer in sorted(self.entries)
                for metric, raw in sorted(self.entries[layer].items())
            ],
            "averages": self.averages,
            "skipped_layers": list(self.skipped_layers),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "BaselineTable":
        entries: dict[int, dict[str, float]] = {}
        for row in doc.get("entries", []):
            entries.setdefault(int(row["layer"]), {})[str(row["metric"])] = float(row["raw"])
        return cls(
            set_a=doc.get("set_a", ""),
            set_b=doc.get("set_b", ""),
            entries=entries,
            averages={k: float(v) for k, v in doc.get("averages", {}).items()},
            skipped_layers=tuple(doc.get("skipped_layers", [])),
            config=doc.get("config", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BaselineTable":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EvaluationReport:
    set_real: str
    set_synth: str
    per_layer: tuple[LayerScore, ...]
    averages: dict[str, dict[str, float | None]]
    skipped_layers: tuple[int, ...]
    config: dict

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "kind": "evaluation",
            "set_real": self.set_real,
            "set_synth": self.set_synth,
            "config": self.config,
            "per_layer": [
                {
                    "layer": s.layer,
                    "metric": s.metric,
                    "raw": s.raw,
                    "normalized": s.normalized,
                    "n_real": s.n_real,
                    "n_synth": s.n_synth,
                }
                for s in self.per_layer
            ],
            "averages": self.averages,
            "skipped_layers": list(self.skipped_layers),
        }


def _layer_slices(image_set: ImageSet) -> dict[int, list[SliceImage]]:
    if image_set.layers is None:
        raise InvalidParameter(f"set {image_set.set_id}: layers not assigned")
    by_layer: dict[int, list[SliceImage]] = {k: [] for k in range(1, N_LAYERS + 1)}
    for img in image_set.iter_slices():
        by_layer[image_set.layers[img.key]].append(img)
    for layer in by_layer:
        by_layer[layer].sort(key=lambda s: s.key)
    return by_layer


def _require_ct(image_set: ImageSet) -> None:
    for img in image_set.iter_slices():
        if not img.modality.is_ct:
            raise InvalidParameter(
                f"set {image_set.set_id}: slice {img.key} is {img.modality.value}; "
                "evaluation compares CT sets"
            )


def _pad_shape(sets: list[ImageSet]) -> tuple[int, int]:
    rows = max(img.rows for s in sets for img in s.iter_slices())
    cols = max(img.cols for s in sets for img in s.iter_slices())
    return (next_pow2(rows), next_pow2(cols))


def _layer_metrics(
    side_a: list[SliceImage],
    side_b: list[SliceImage],
    config: EvalConfig,
    pad_shape: tuple[int, int],
    features: tuple[FeatureMatrix, FeatureMatrix] | None,
) -> dict[str, float]:
    binning = TissueBinning(config.tissue_t1, config.tissue_t2, config.hu_range)

    def side_summaries(slices):
        hist = average_histogram(
            [image_histogram(s, config.n_bins, config.hu_range) for s in slices]
        )
        tissue = average_histogram([tissue_histogram(s, binning) for s in slices])
        spectrum = average_spectrum([to_spectrum(s, pad_shape) for s in slices])
        return hist, tissue, spectrum

    hist_a, tissue_a, spec_a = side_summaries(side_a)
    hist_b, tissue_b, spec_b = side_summaries(side_b)

    scores = {
        "KL256": kl_divergence(hist_a, hist_b, config.kl_epsilon),
        "KL3": kl_divergence(tissue_a, tissue_b, config.kl_epsilon),
        "HistCorr": hist_correlation(hist_a, hist_b),
        "HistInter": hist_intersection(hist_a, hist_b),
        "SpectCorr": spectrum_correlation(spec_a, spec_b),
    }
    if features is not None:
        feats_a = features[0].select([s.key for s in side_a])
        feats_b = features[1].select([s.key for s in side_b])
        scores["FID"] = fid_between_sets(feats_a, feats_b, config.frechet_eps)
    return scores


def _scores_by_layer(
    set_a: ImageSet,
    set_b: ImageSet,
    config: EvalConfig,
    features: tuple[FeatureMatrix, FeatureMatrix] | None,
):
    """Raw per-layer scores plus slice counts and the skipped-layer list."""
    by_layer_a = _layer_slices(set_a)
    by_layer_b = _layer_slices(set_b)
    pad_shape = _pad_shape([set_a, set_b])

    eligible = []
    skipped = []
    counts = {}
    for layer in range(1, N_LAYERS + 1):
        n_a, n_b = len(by_layer_a[layer]), len(by_layer_b[layer])
        counts[layer] = (n_a, n_b)
        if n_a >= config.min_slices and n_b >= config.min_slices:
            eligible.append(layer)
        else:
            skipped.append(layer)

    def work(layer: int) -> tuple[int, dict[str, float]]:
        return layer, _layer_metrics(
            by_layer_a[layer], by_layer_b[layer], config, pad_shape, features
        )

    max_workers = config.threads or os.cpu_count() or 1
    if max_workers > 1 and len(eligible) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = dict(pool.map(work, eligible))
    else:
        results = dict(work(layer) for layer in eligible)

    return results, counts, skipped


def _check_compatible(set_a: ImageSet, set_b: ImageSet) -> None:
    _require_ct(set_a)
    _require_ct(set_b)
    if set_a.contrast_enhanced != set_b.contrast_enhanced:
        raise InvalidParameter(
            f"sets {set_a.set_id} and {set_b.set_id} mix contrast-enhanced and "
            "non-contrast CT; evaluate them against their own baselines"
        )


def compute_baseline(
    real_holdout: ImageSet,
    real_rest: ImageSet,
    features: tuple[FeatureMatrix, FeatureMatrix] | None = None,
    config: EvalConfig | None = None,
) -> BaselineTable:
    """Score two disjoint real subsets against each other, layer by layer.

    Every entry must be strictly positive to serve as a normalizer;
    otherwise DegenerateBaseline names the offending layer and metric.
    """
    config = config or EvalConfig()
    if real_holdout.provenance != "real" or real_rest.provenance != "real":
        raise InvalidParameter("baseline sets must both have provenance 'real'")
    _check_compatible(real_holdout, real_rest)

    results, _, skipped = _scores_by_layer(real_holdout, real_rest, config, features)
    for layer in sorted(results):
        for metric, raw in sorted(results[layer].items()):
            if raw <= 0.0:
                raise DegenerateBaseline(
                    f"baseline entry for layer {layer}, metric {metric} is "
                    f"{raw:.6g}; cannot normalize by it"
                )

    metric_names = sorted({m for scores in results.values() for m in scores})
    averages = {
        m: float(np.mean([results[layer][m] for layer in results if m in results[layer]]))
        for m in metric_names
    }
    extractor = features[0].extractor_desc if features else None
    return BaselineTable(
        set_a=real_holdout.set_id,
        set_b=real_rest.set_id,
        entries={layer: dict(scores) for layer, scores in results.items()},
        averages=averages,
        skipped_layers=tuple(skipped),
        config=config.snapshot(extractor),
    )


def evaluate_sets(
    real: ImageSet,
    synth: ImageSet,
    baseline: BaselineTable | None = None,
    features: tuple[FeatureMatrix, FeatureMatrix] | None = None,
    config: EvalConfig | None = None,
) -> EvaluationReport:
    """Layer-wise scores of a synthetic set against a real set.

    FID is included only when a (real, synth) feature pair is given.
    With a baseline, each score also gets raw / baseline(layer, metric),
    and per-metric averages are divided by the baseline's average.
    """
    config = config or EvalConfig()
    _check_compatible(real, synth)

    if baseline is not None:
        for layer in sorted(baseline.entries):
            for metric, raw in sorted(baseline.entries[layer].items()):
                if raw <= 0.0:
                    raise DegenerateBaseline(
                        f"baseline entry for layer {layer}, metric {metric} is "
                        f"{raw:.6g}; cannot normalize by it"
                    )

    results, counts, skipped = _scores_by_layer(real, synth, config, features)

    per_layer = []
    for layer in sorted(results):
        n_real, n_synth = counts[layer]
        for metric in METRICS:
            if metric not in results[layer]:
                continue
            raw = results[layer][metric]
            normalized = None
            if baseline is not None:
                base = baseline.lookup(layer, metric)
                if base is not None:
                    normalized = raw / base
            per_layer.append(
                LayerScore(
                    layer=layer,
                    metric=metric,
                    raw=raw,
                    normalized=normalized,
                    n_real=n_real,
                    n_synth=n_synth,
                )
            )

    averages: dict[str, dict[str, float | None]] = {}
    metric_names = sorted({m for scores in results.values() for m in scores})
    for metric in metric_names:
        raws = [results[layer][metric] for layer in sorted(results) if metric in results[layer]]
        raw_avg = float(np.mean(raws))
        norm_avg = None
        if baseline is not None and metric in baseline.averages:
            base_avg = baseline.averages[metric]
            if base_avg <= 0.0:
                raise DegenerateBaseline(
                    f"baseline average for metric {metric} is {base_avg:.6g}"
                )
            norm_avg = raw_avg / base_avg
        averages[metric] = {"raw": raw_avg, "normalized": norm_avg}

    extractor = features[0].extractor_desc if features else None
    return EvaluationReport(
        set_real=real.set_id,
        set_synth=synth.set_id,
        per_layer=tuple(per_layer),
        averages=averages,
        skipped_layers=tuple(skipped),
        config=config.snapshot(extractor),
    )


def export_report(report: EvaluationReport, out_dir: str | Path) -> list[Path]:
    """Write report.json, scores.csv, and one SVG chart per metric.

    Serialization is deterministic: re-exporting the same report yields
    byte-identical files.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []

        report_path = out_dir / "report.json"
        report_path.write_text(json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n")
        written.append(report_path)

        csv_path = out_dir / "scores.csv"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["layer", "metric", "raw", "normalized", "n_real", "n_synth"])
        for s in report.per_layer:
            writer.writerow(
                [
                    s.layer,
                    s.metric,
                    repr(s.raw),
                    "" if s.normalized is None else repr(s.normalized),
                    s.n_real,
                    s.n_synth,
                ]
            )
        csv_path.write_text(buf.getvalue())
        written.append(csv_path)

        scored = {s.metric: {} for s in report.per_layer}
        for s in report.per_layer:
            scored[s.metric][s.layer] = s.raw if s.normalized is None else s.normalized
        for metric in METRICS:
            points = scored.get(metric, {})
            y_label = "normalized score" if any(
                s.metric == metric and s.normalized is not None for s in report.per_layer
            ) else "raw score"
            svg_path = out_dir / f"{metric}.svg"
            svg_path.write_text(
                charts.layer_chart(
                    f"{metric}: {report.set_synth} vs {report.set_real}", points, y_label
                )
            )
            written.append(svg_path)
        return written
    except OSError as exc:
        raise IoError(f"cannot write report to {out_dir}: {exc}") from exc
