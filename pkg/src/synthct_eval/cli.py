"""Command-line entry point.

Exit codes: 0 on success, 1 on a domain error (the message names the
error type), 2 on usage errors. All randomness flows from --seed; every
subcommand except `survey serve` writes byte-identical outputs given
identical inputs and seed.
"""

from __future__ import annotations

import functools
import json
import sys
from collections import Counter
from pathlib import Path

import click

from .errors import ToolkitError
from .evaluation import BaselineTable, EvalConfig, compute_baseline, evaluate_sets, export_report
from .frechet import load_features
from .imaging import DEFAULT_HU_RANGE, N_LAYERS, assign_layers, load_manifest
from .spectral import average_spectrum, next_pow2, save_spectrum, to_spectrum
from .surveyservice import create_app, make_survey, persist_survey
from .surveystats import comparison_report, load_survey_log


def domain_errors(fn):
    """Map ToolkitError subclasses to exit code 1 with a typed message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ToolkitError as exc:
            click.echo(f"{type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


def config_options(fn):
    fn = click.option("--bins", default=256, show_default=True, help="Histogram bin count.")(fn)
    fn = click.option("--t1", default=-200.0, show_default=True, help="Tissue threshold 1 (HU).")(fn)
    fn = click.option("--t2", default=200.0, show_default=True, help="Tissue threshold 2 (HU).")(fn)
    fn = click.option("--hu-lo", default=DEFAULT_HU_RANGE[0], show_default=True)(fn)
    fn = click.option("--hu-hi", default=DEFAULT_HU_RANGE[1], show_default=True)(fn)
    fn = click.option("--min-slices", default=5, show_default=True,
                      help="Minimum slices per layer per side before a layer is scored.")(fn)
    fn = click.option("--seed", default=0, show_default=True, help="Seed for all randomness.")(fn)
    fn = click.option("--threads", default=None, type=int,
                      help="Worker thread cap (default: available cores).")(fn)
    return fn


def build_config(bins, t1, t2, hu_lo, hu_hi, min_slices, seed, threads) -> EvalConfig:
    return EvalConfig(
        n_bins=bins,
        tissue_t1=t1,
        tissue_t2=t2,
        hu_range=(hu_lo, hu_hi),
        min_slices=min_slices,
        seed=seed,
        threads=threads,
    )


def load_feature_pair(path_a, path_b, what):
    if (path_a is None) != (path_b is None):
        raise click.UsageError(f"supply both or neither of the {what} feature files")
    if path_a is None:
        return None
    return (load_features(path_a), load_features(path_b))


@click.group()
@click.version_option(package_name="synthct-eval")
def cli():
    """Evaluate synthetic CT sets against real ones and run blind surveys."""


@cli.command("ingest-check")
@click.option("--manifest", "manifests", multiple=True, required=True,
              type=click.Path(exists=False), help="Manifest JSON (repeatable).")
@config_options
@domain_errors
def ingest_check(manifests, **cfg):
    """Load manifests, assign layers, and print per-set summaries."""
    for manifest in manifests:
        image_set = assign_layers(load_manifest(manifest))
        layer_counts = Counter(image_set.layers.values())
        click.echo(f"{image_set.set_id}: provenance={image_set.provenance} "
                   f"volumes={len(image_set.volumes)} slices={image_set.n_slices} "
                   f"contrast_enhanced={image_set.contrast_enhanced}")
        row = " ".join(f"L{k}:{layer_counts.get(k, 0)}" for k in range(1, N_LAYERS + 1))
        click.echo(f"  layers {row}")
    click.echo("ok")


@cli.command()
@click.option("--holdout", required=True, type=click.Path(), help="Real holdout manifest.")
@click.option("--rest", required=True, type=click.Path(), help="Remaining real manifest.")
@click.option("--features-holdout", type=click.Path(), default=None)
@click.option("--features-rest", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path(), help="Baseline JSON output path.")
@config_options
@domain_errors
def baseline(holdout, rest, features_holdout, features_rest, out, **cfg):
    """Compute the real-vs-real baseline table used for normalization."""
    config = build_config(**cfg)
    features = load_feature_pair(features_holdout, features_rest, "holdout/rest")
    set_a = assign_layers(load_manifest(holdout))
    set_b = assign_layers(load_manifest(rest))
    table = compute_baseline(set_a, set_b, features=features, config=config)
    table.save(out)
    click.echo(f"baseline written to {out} "
               f"({sum(len(v) for v in table.entries.values())} entries, "
               f"skipped layers: {list(table.skipped_layers) or 'none'})")


@cli.command("eval")
@click.option("--real", "real_manifest", required=True, type=click.Path())
@click.option("--synth", "synth_manifest", required=True, type=click.Path())
@click.option("--baseline", "baseline_path", type=click.Path(), default=None)
@click.option("--features-real", type=click.Path(), default=None)
@click.option("--features-synth", type=click.Path(), default=None)
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@config_options
@domain_errors
def eval_cmd(real_manifest, synth_manifest, baseline_path, features_real,
             features_synth, out, **cfg):
    """Evaluate a synthetic set against a real set, layer by layer."""
    config = build_config(**cfg)
    features = load_feature_pair(features_real, features_synth, "real/synth")
    real = assign_layers(load_manifest(real_manifest))
    synth = assign_layers(load_manifest(synth_manifest))
    table = BaselineTable.load(baseline_path) if baseline_path else None
    report = evaluate_sets(real, synth, baseline=table, features=features, config=config)
    written = export_report(report, out)
    for path in written:
        click.echo(f"wrote {path}")


@cli.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@config_options
@domain_errors
def spectra(manifest, out, **cfg):
    """Export per-layer average spectra as 16-bit portable images."""
    image_set = assign_layers(load_manifest(manifest))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    shape = (
        next_pow2(max(s.rows for s in image_set.iter_slices())),
        next_pow2(max(s.cols for s in image_set.iter_slices())),
    )
    for layer in range(1, N_LAYERS + 1):
        slices = image_set.slices_in_layer(layer)
        if not slices:
            click.echo(f"layer {layer}: no slices, skipped")
            continue
        spec = average_spectrum([to_spectrum(s, shape) for s in slices])
        path = out_dir / f"layer_{layer:02d}.pgm"
        save_spectrum(spec, path)
        click.echo(f"wrote {path} ({len(slices)} slices)")


@cli.group()
def survey():
    """Create, serve, and analyze blind surveys."""


@survey.command("make")
@click.option("--real", "real_manifest", required=True, type=click.Path())
@click.option("--synth", "synth_manifest", required=True, type=click.Path())
@click.option("--n-real", default=10, show_default=True)
@click.option("--n-synth", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Survey data directory.")
@domain_errors
def survey_make(real_manifest, synth_manifest, n_real, n_synth, seed, out):
    """Assemble a seeded blind survey bundle from two pools."""
    real_pool = load_manifest(real_manifest)
    synth_pool = load_manifest(synth_manifest)
    defn = make_survey(real_pool, synth_pool, n_real, n_synth, seed)
    survey_dir = persist_survey(defn, out)
    click.echo(f"survey {defn.survey_id} with {len(defn.items)} items "
               f"written to {survey_dir}")


@survey.command("serve")
@click.option("--data-dir", required=True, type=click.Path(), help="Survey bundles root.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Optional built browser client to mount at /.")
@domain_errors
def survey_serve(data_dir, host, port, static_dir):
    """Serve surveys over HTTP (token via the SURVEY_TOKEN env var)."""
    import uvicorn

    app = create_app(data_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@survey.command("stats")
@click.option("--survey-dir", "survey_dirs", multiple=True, type=click.Path(),
              help="Survey bundle directory (repeatable).")
@click.option("--log", "log_path", type=click.Path(), default=None)
@click.option("--truth", "truth_path", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None, help="Write JSON here instead of stdout.")
@click.option("--yates/--no-yates", default=False, show_default=True,
              help="Apply Yates' continuity correction (sensitivity analysis only).")
@domain_errors
def survey_stats_cmd(survey_dirs, log_path, truth_path, out, yates):
    """Accuracy tables and Chi-squared tests from survey response logs."""
    records = []
    if survey_dirs:
        for d in survey_dirs:
            d = Path(d)
            records.extend(load_survey_log(d / "responses.jsonl", d / "truth.json"))
    elif log_path and truth_path:
        records.extend(load_survey_log(log_path, truth_path))
    else:
        raise click.UsageError("supply --survey-dir (repeatable) or --log with --truth")

    by_survey: dict[str, list] = {}
    for record in records:
        by_survey.setdefault(record.survey_id, []).append(record)
    report = comparison_report(by_survey, yates=yates)
    text = json.dumps(report, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


def main():
    cli(prog_name="synthct-eval")


if __name__ == "__main__":
    main()
