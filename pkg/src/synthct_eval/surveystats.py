"""Blind-survey statistics: accuracy tables and Chi-squared tests.

Raters judge each scan as synthetic (0), real (1), or indeterminable (2).
Accuracy near 50% on a balanced survey means the synthetic scans were
indistinguishable. Response distributions are compared with Chi-squared
homogeneity tests, treating judgments either as binomial (indeterminable
responses dropped) or multinomial (kept as a third category).

Only p-values are reported; no significance decision is encoded here,
interpretation belongs to the surrounding narrative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaincc

from .errors import DegenerateTable, InvalidParameter, MalformedInput

JUDGMENT_SYNTHETIC = 0
JUDGMENT_REAL = 1
JUDGMENT_INDETERMINABLE = 2

TRUTH_VALUES = ("real", "synthetic")


@dataclass(frozen=True)
class SurveyRecord:
    """One physician judgment joined with the server-side ground truth."""

    survey_id: str
    rater_id: str
    item_id: str
    truth: str
    judgment: int
    rationale: str | None = None
    timestamp: str | None = None

    def __post_init__(self):
        if self.truth not in TRUTH_VALUES:
            raise InvalidParameter(f"truth must be one of {TRUTH_VALUES}, got {self.truth!r}")
        if self.judgment not in (0, 1, 2):
            raise InvalidParameter(f"judgment must be 0, 1, or 2, got {self.judgment!r}")

    @property
    def correct(self) -> bool:
        """Indeterminable never counts as correct."""
        return (self.judgment == JUDGMENT_REAL and self.truth == "real") or (
            self.judgment == JUDGMENT_SYNTHETIC and self.truth == "synthetic"
        )


def load_survey_log(log_path: str | Path, truth_path: str | Path) -> list[SurveyRecord]:
    """Join a JSONL response log with its truth file.

    Log lines: {"survey_id","rater_id","item_id","judgment":0|1|2,
    "rationale","ts"}; truth file: {"<item_id>": "real"|"synthetic"}.
    """
    log_path, truth_path = Path(log_path), Path(truth_path)
    if not truth_path.is_file():
        raise MalformedInput(f"{truth_path}: no such file")
    truth = json.loads(truth_path.read_text())

    records = []
    if not log_path.is_file():
        raise MalformedInput(f"{log_path}: no such file")
    for lineno, line in enumerate(log_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"{log_path}:{lineno}: invalid JSON: {exc}") from exc
        for key in ("survey_id", "rater_id", "item_id", "judgment"):
            if key not in doc:
                raise MalformedInput(f"{log_path}:{lineno}: missing field {key!r}")
        item_id = str(doc["item_id"])
        if item_id not in truth:
            raise MalformedInput(
                f"{log_path}:{lineno}: item {item_id!r} missing from {truth_path.name}"
            )
        records.append(
            SurveyRecord(
                survey_id=str(doc["survey_id"]),
                rater_id=str(doc["rater_id"]),
                item_id=item_id,
                truth=str(truth[item_id]),
                judgment=int(doc["judgment"]),
                rationale=doc.get("rationale"),
                timestamp=doc.get("ts"),
            )
        )
    return records


def _pct(correct: int, total: int) -> float | None:
    if total == 0:
        return None
    return round(correct / total * 100.0, 1)


def accuracy_breakdown(
    records: list[SurveyRecord], exclude_indeterminable: bool = False
) -> dict[str, float | None]:
    """Correct-guess percentages for the full set and per-truth groupings.

    By default an indeterminable response counts as an incorrect guess;
    with exclude_indeterminable those records leave the denominator too.
    Percentages are rounded to 0.1.
    """
    if not records:
        raise InvalidParameter("cannot compute accuracy of an empty record list")
    if exclude_indeterminable:
        records = [r for r in records if r.judgment != JUDGMENT_INDETERMINABLE]

    def group(truth: str | None) -> float | None:
        sel = [r for r in records if truth is None or r.truth == truth]
        return _pct(sum(r.correct for r in sel), len(sel))

    return {
        "full": group(None),
        "real_only": group("real"),
        "synth_only": group("synthetic"),
    }


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulation of judgment categories for two (or more) series."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(self.rows), len(self.cols)):
            raise InvalidParameter(
                f"counts shape {counts.shape} does not match "
                f"{len(self.rows)} rows x {len(self.cols)} cols"
            )
        if np.any(counts < 0):
            raise InvalidParameter("contingency counts must be non-negative")
        if len(self.rows) < 2 or len(self.cols) < 2:
            raise DegenerateTable(
                f"need at least 2x2 categories, got {len(self.rows)}x{len(self.cols)}"
            )
        object.__setattr__(self, "counts", counts)
        counts.setflags(write=False)


def build_table(
    records_a: list[SurveyRecord],
    records_b: list[SurveyRecord],
    mode: str,
    labels: tuple[str, str] = ("A", "B"),
) -> ContingencyTable:
    """Tally two response series into a judgment contingency table.

    binomial: categories {0, 1}, indeterminable responses dropped;
    multinomial: categories {0, 1, 2}. All-zero columns are removed; a
    series left with no responses makes the table degenerate.
    """
    if mode not in ("binomial", "multinomial"):
        raise InvalidParameter(f"mode must be 'binomial' or 'multinomial', got {mode!r}")
    if not records_a or not records_b:
        raise InvalidParameter("both record series must be non-empty")

    categories = [0, 1] if mode == "binomial" else [0, 1, 2]

    def tally(records):
        kept = [r for r in records if r.judgment in categories]
        return [sum(r.judgment == c for r in kept) for c in categories]

    counts = np.array([tally(records_a), tally(records_b)], dtype=np.int64)
    if np.any(counts.sum(axis=1) == 0):
        empty = labels[int(np.argmin(counts.sum(axis=1)))]
        raise DegenerateTable(
            f"series {empty!r} has no responses left in {mode} mode"
        )
    keep = counts.sum(axis=0) > 0
    counts = counts[:, keep]
    cols = tuple(str(c) for c, k in zip(categories, keep) if k)
    if counts.shape[1] < 2:
        raise DegenerateTable(
            f"fewer than 2 non-empty judgment categories in {mode} mode"
        )
    return ContingencyTable(rows=labels, cols=cols, counts=counts)


def chi_squared_test(table: ContingencyTable, yates: bool = False) -> dict:
    """Chi-squared homogeneity test on a contingency table.

    Expected counts are E_ij = row_i * col_j / total; the p-value is the
    upper tail Q(dof/2, X^2/2) of the chi-squared distribution. Yates'
    continuity correction is off by default and available only for
    sensitivity analysis.
    """
    observed = table.counts.astype(np.float64)
    row_sums = observed.sum(axis=1, keepdims=True)
    col_sums = observed.sum(axis=0, keepdims=True)
    total = observed.sum()
    if total == 0 or np.any(row_sums == 0) or np.any(col_sums == 0):
        raise DegenerateTable("expected count of zero; every row and column needs data")
    expected = row_sums @ col_sums / total
    diff = np.abs(observed - expected)
    if yates:
        diff = np.maximum(diff - 0.5, 0.0)
    statistic = float(np.sum(diff**2 / expected))
    dof = (len(table.rows) - 1) * (len(table.cols) - 1)
    p_value = float(gammaincc(dof / 2.0, statistic / 2.0))
    return {"statistic": statistic, "dof": dof, "p_value": p_value}


def _split_by_truth(records: list[SurveyRecord]):
    reals = [r for r in records if r.truth == "real"]
    synths = [r for r in records if r.truth == "synthetic"]
    return reals, synths


def _run_test(label, mode, series_a, series_b, labels, yates=False) -> dict:
    entry = {"label": label, "mode": mode}
    try:
        table = build_table(series_a, series_b, mode, labels)
        entry.update(chi_squared_test(table, yates=yates))
    except (DegenerateTable, InvalidParameter) as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def survey_stats(records: list[SurveyRecord], yates: bool = False) -> dict:
    """Accuracy plus real-vs-synthetic tests for one survey's records."""
    if not records:
        raise InvalidParameter("no survey records")
    reals, synths = _split_by_truth(records)
    tests = [
        _run_test(
            "real vs synthetic", mode, reals, synths, ("real", "synthetic"), yates
        )
        for mode in ("binomial", "multinomial")
    ]
    return {
        "n_records": len(records),
        "accuracy": accuracy_breakdown(records),
        "accuracy_excluding_indeterminable": accuracy_breakdown(
            records, exclude_indeterminable=True
        ),
        "tests": tests,
    }


def comparison_report(survey_records: dict[str, list[SurveyRecord]], yates: bool = False) -> dict:
    """Full statistics across several surveys.

    For k surveys this runs, in binomial and multinomial modes: one
    real-vs-synthetic test per survey, one pooled real-vs-synthetic test,
    and one test per survey pair (eleven comparisons for four surveys).
    """
    if not survey_records:
        raise InvalidParameter("no surveys supplied")
    ids = sorted(survey_records)
    tests = []
    for mode in ("binomial", "multinomial"):
        for sid in ids:
            reals, synths = _split_by_truth(survey_records[sid])
            tests.append(
                _run_test(
                    f"{sid}: real vs synthetic", mode, reals, synths,
                    ("real", "synthetic"), yates,
                )
            )
        if len(ids) > 1:
            pooled = [r for sid in ids for r in survey_records[sid]]
            reals, synths = _split_by_truth(pooled)
            tests.append(
                _run_test(
                    "all surveys: real vs synthetic", mode, reals, synths,
                    ("real", "synthetic"), yates,
                )
            )
            for i, sid_a in enumerate(ids):
                for sid_b in ids[i + 1 :]:
                    tests.append(
                        _run_test(
                            f"{sid_a} vs {sid_b}", mode,
                            survey_records[sid_a], survey_records[sid_b],
                            (sid_a, sid_b), yates,
                        )
                    )

    accuracy = {
        sid: {
            "n_records": len(survey_records[sid]),
            "counting_indeterminable_as_incorrect": accuracy_breakdown(survey_records[sid]),
            "excluding_indeterminable": accuracy_breakdown(
                survey_records[sid], exclude_indeterminable=True
            ),
        }
        for sid in ids
    }
    return {"schema": 1, "accuracy": accuracy, "tests": tests}
