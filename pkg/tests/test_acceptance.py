"""Acceptance gate: one test per release criterion, at stated tolerances.

Each test prints one PASS line on success (run with -s or check captured
output); a failed assertion marks the criterion red. This module exercises
only the installed synthct_eval package; neither the browser client nor
the feature exporter needs to exist for it to run.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from synthct_eval.evaluation import EvalConfig, evaluate_sets, export_report
from synthct_eval.frechet import (
    FeatureMatrix,
    GaussianSummary,
    fid_between_sets,
    frechet_distance,
    sqrt_spd,
)
from synthct_eval.histograms import (
    Histogram,
    hist_correlation,
    hist_intersection,
    kl_divergence,
)
from synthct_eval.imaging import assign_layers
from synthct_eval.spectral import fft2d, ifft2d, to_spectrum
from synthct_eval.surveystats import (
    ContingencyTable,
    SurveyRecord,
    accuracy_breakdown,
    chi_squared_test,
)

from conftest import block_mean_features, degrade_set, make_phantom_set


def report_pass(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS", flush=True)


def density(values):
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    return Histogram(n, np.arange(n + 1.0), np.zeros(n, dtype=np.int64), values)


def test_frechet_analytic_suite():
    start = time.monotonic()

    b = np.random.default_rng(0).normal(size=(6, 6))
    g = GaussianSummary(mean=np.arange(6.0), cov=b.T @ b)
    assert frechet_distance(g, g) == pytest.approx(0.0, abs=1e-9)

    g1 = GaussianSummary(mean=np.array([0.0]), cov=np.array([[1.0]]))
    g2 = GaussianSummary(mean=np.array([1.0]), cov=np.array([[1.0]]))
    assert frechet_distance(g1, g2) == pytest.approx(1.0, abs=1e-9)

    d1 = GaussianSummary(mean=np.zeros(2), cov=np.diag([1.0, 4.0]))
    d2 = GaussianSummary(mean=np.ones(2), cov=np.diag([4.0, 1.0]))
    assert frechet_distance(d1, d2) == pytest.approx(4.0, abs=1e-8)

    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    report_pass(f"frechet-analytic-suite ({elapsed:.3f}s)")


def test_spd_root_residuals():
    start = time.monotonic()
    rng = np.random.default_rng(7)
    count = 0
    for d in (2, 8, 32):
        for _ in range(50):
            b = rng.normal(size=(d, d))
            a = b.T @ b
            s = sqrt_spd(a)
            residual = np.linalg.norm(s @ s - a) / max(np.linalg.norm(a), 1e-30)
            assert residual < 1e-8
            count += 1
    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    report_pass(f"spd-root {count} matrices ({elapsed:.3f}s)")


def test_sampled_fid_consistency():
    start = time.monotonic()
    rng = np.random.default_rng(1234)
    m1, v1 = np.zeros(4), np.array([1.0, 2.0, 3.0, 4.0])
    m2, v2 = np.ones(4), np.array([4.0, 3.0, 2.0, 1.0])
    a = FeatureMatrix(
        data=rng.normal(m1, np.sqrt(v1), size=(10_000, 4)),
        ids=tuple(f"a{i}" for i in range(10_000)),
    )
    b = FeatureMatrix(
        data=rng.normal(m2, np.sqrt(v2), size=(10_000, 4)),
        ids=tuple(f"b{i}" for i in range(10_000)),
    )
    analytic = float(np.sum((m1 - m2) ** 2) + np.sum((np.sqrt(v1) - np.sqrt(v2)) ** 2))
    sampled = fid_between_sets(a, b)
    assert abs(sampled - analytic) / analytic < 0.05
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    report_pass(
        f"sampled-fid sampled={sampled:.4f} analytic={analytic:.4f} ({elapsed:.3f}s)"
    )


def test_kl_suite():
    p = density([0.3, 0.2, 0.5])
    assert abs(kl_divergence(p, p)) <= 1e-12

    assert kl_divergence(density([1.0, 0.0]), density([0.5, 0.5])) == pytest.approx(
        math.log(2.0), abs=1e-9
    )

    rng = np.random.default_rng(42)
    for _ in range(1000):
        a = rng.uniform(0, 1, size=12)
        b = rng.uniform(0, 1, size=12)
        d = kl_divergence(density(a / a.sum()), density(b / b.sum()))
        assert d >= -1e-12
    report_pass("kl-suite (identity, ln2, 1000 nonnegative pairs)")


def test_histogram_correlation_and_intersection():
    h = density([0.6, 0.4])
    assert hist_correlation(h, h) == pytest.approx(1.0, abs=1e-12)
    assert hist_correlation(density([1, 0]), density([0, 1])) == pytest.approx(
        -1.0, abs=1e-12
    )
    assert hist_intersection(h, h) == pytest.approx(1.0, abs=1e-12)
    assert hist_intersection(density([1, 0]), density([0, 1])) == pytest.approx(
        0.0, abs=1e-12
    )
    assert hist_intersection(density([0.7, 0.3]), density([0.4, 0.6])) == pytest.approx(
        0.7, abs=1e-12
    )
    report_pass("histogram-correlation-intersection")


def test_fft_suite():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(64, 64))
    back = ifft2d(fft2d(x)).real
    assert np.linalg.norm(back - x) / np.linalg.norm(x) < 1e-6

    spatial = np.sum(np.abs(x) ** 2)
    spectral = np.sum(np.abs(fft2d(x)) ** 2) / x.size
    assert abs(spatial - spectral) / spatial < 1e-6

    n, k = 64, 9
    grating = np.tile(np.sin(2 * np.pi * k * np.arange(n) / n), (n, 1))
    spec = to_spectrum(grating)
    flat = sorted(
        ((-spec.values[r, c], r, c) for r in range(n) for c in range(n))
    )
    top_two = {(r, c) for _, r, c in flat[:2]}
    assert top_two == {(n // 2, n // 2 - k), (n // 2, n // 2 + k)}
    report_pass("fft (round-trip, parseval, grating peaks)")


def test_chi_squared_suite():
    flat = chi_squared_test(
        ContingencyTable(("a", "b"), ("0", "1"), np.array([[5, 5], [5, 5]]))
    )
    assert flat["statistic"] == 0.0 and flat["dof"] == 1 and flat["p_value"] == 1.0

    skew = chi_squared_test(
        ContingencyTable(("a", "b"), ("0", "1"), np.array([[10, 20], [20, 10]]))
    )
    assert skew["statistic"] == pytest.approx(6.6667, abs=1e-4)

    def chi2_density(u, dof):
        return u ** (dof / 2.0 - 1.0) * math.exp(-u / 2.0) / (
            2.0 ** (dof / 2.0) * math.gamma(dof / 2.0)
        )

    oracle, _ = quad(chi2_density, skew["statistic"], np.inf, args=(1,), limit=200)
    assert skew["p_value"] == pytest.approx(0.00982, abs=1e-5)
    assert skew["p_value"] == pytest.approx(oracle, abs=1e-5)

    doubled = chi_squared_test(
        ContingencyTable(("a", "b"), ("0", "1"), np.array([[20, 40], [40, 20]]))
    )
    assert doubled["statistic"] == 2 * skew["statistic"]
    report_pass(
        f"chi-squared (p={skew['p_value']:.5f} vs oracle {oracle:.5f}, scaling exact)"
    )


def test_stratified_pipeline(tmp_path):
    start = time.monotonic()
    config = EvalConfig()

    # 200-slice phantom: 2 volumes x 100 slices, 20 per layer
    real = assign_layers(make_phantom_set("accept-real", "real", 2, 100, seed=101))
    assert real.n_slices == 200
    twin = replace(real, set_id="accept-twin", provenance="synthetic")
    feats = block_mean_features(real)

    report = evaluate_sets(real, twin, features=(feats, feats), config=config)
    scored_layers = {s.layer for s in report.per_layer}
    assert scored_layers == set(range(1, 11))
    for s in report.per_layer:
        if s.metric in ("KL256", "KL3"):
            assert abs(s.raw) <= 1e-12
        elif s.metric in ("HistCorr", "HistInter", "SpectCorr"):
            assert s.raw == pytest.approx(1.0, abs=1e-9)
        elif s.metric == "FID":
            assert s.raw == pytest.approx(0.0, abs=1e-8)

    # degradation monotonicity at sigma = 0, 0.05, 0.2 of the HU span
    per_sigma = {}
    for sigma in (0.0, 0.05, 0.2):
        synth = assign_layers(degrade_set(real, sigma, seed=9))
        pair = (block_mean_features(real), block_mean_features(synth))
        rep = evaluate_sets(real, synth, features=pair, config=config)
        per_sigma[sigma] = {
            metric: {s.layer: s.raw for s in rep.per_layer if s.metric == metric}
            for metric in ("KL256", "FID", "HistInter")
        }
    for layer in range(1, 11):
        kl = [per_sigma[s]["KL256"][layer] for s in (0.0, 0.05, 0.2)]
        fid = [per_sigma[s]["FID"][layer] for s in (0.0, 0.05, 0.2)]
        inter = [per_sigma[s]["HistInter"][layer] for s in (0.0, 0.05, 0.2)]
        assert kl[0] <= kl[1] <= kl[2]
        assert fid[0] <= fid[1] <= fid[2]
        assert inter[0] >= inter[1] >= inter[2]

    # byte-identical re-run
    synth = assign_layers(degrade_set(real, 0.05, seed=9))
    pair = (feats, block_mean_features(synth))
    export_report(evaluate_sets(real, synth, features=pair, config=config), tmp_path / "r1")
    export_report(evaluate_sets(real, synth, features=pair, config=config), tmp_path / "r2")
    bytes_a = (tmp_path / "r1" / "report.json").read_bytes()
    bytes_b = (tmp_path / "r2" / "report.json").read_bytes()
    assert bytes_a == bytes_b

    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    report_pass(f"stratified-pipeline 200 slices ({elapsed:.1f}s)")


def test_survey_stats_table():
    records = []
    for k in range(10):
        records.append(
            SurveyRecord(
                survey_id="s", rater_id="r", item_id=f"real{k}", truth="real", judgment=1
            )
        )
    for k in range(10):
        records.append(
            SurveyRecord(
                survey_id="s", rater_id="r", item_id=f"syn{k}", truth="synthetic", judgment=1
            )
        )
    table = accuracy_breakdown(records)
    assert table == {"full": 50.0, "real_only": 100.0, "synth_only": 0.0}
    # three-column breakdown: full set, real-only, synthetic-only
    assert list(table) == ["full", "real_only", "synth_only"]
    report_pass("survey-stats accuracy table 50.0/100.0/0.0")


def test_survey_service_criteria(tmp_path):
    from fastapi.testclient import TestClient

    from synthct_eval.surveyservice import create_app, make_survey, persist_survey
    from synthct_eval.surveystats import load_survey_log, survey_stats

    real = make_phantom_set("acc-sr", "real", 1, 12, seed=61)
    synth = make_phantom_set("acc-ss", "synthetic", 1, 12, seed=62)
    defn = make_survey(real, synth, 5, 5, seed=13)
    persist_survey(defn, tmp_path / "data")
    client = TestClient(create_app(tmp_path / "data"))

    def keys_of(node):
        if isinstance(node, dict):
            for k, v in node.items():
                yield k
                yield from keys_of(v)
        elif isinstance(node, list):
            for v in node:
                yield from keys_of(v)

    # no truth leakage across every GET payload
    body = {"rater_id": "dr", "item_id": defn.items[0].item_id, "judgment": "synthetic"}
    assert client.post(f"/api/surveys/{defn.survey_id}/responses", json=body).status_code == 204
    payloads = [
        client.get(f"/api/surveys/{defn.survey_id}/items").json(),
        client.get(f"/api/surveys/{defn.survey_id}/stats").json(),
    ]
    for payload in payloads:
        assert "truth" not in set(keys_of(payload))

    # duplicate response -> 409
    assert client.post(f"/api/surveys/{defn.survey_id}/responses", json=body).status_code == 409

    # finish the survey and replay the log
    for item in defn.items[1:]:
        res = client.post(
            f"/api/surveys/{defn.survey_id}/responses",
            json={"rater_id": "dr", "item_id": item.item_id, "judgment": "real"},
        )
        assert res.status_code == 204
    served = client.get(f"/api/surveys/{defn.survey_id}/stats").json()
    survey_dir = tmp_path / "data" / defn.survey_id
    replayed = survey_stats(
        load_survey_log(survey_dir / "responses.jsonl", survey_dir / "truth.json")
    )
    assert replayed == served
    report_pass("survey-service (no truth leak, 409 duplicate, replay == served)")
