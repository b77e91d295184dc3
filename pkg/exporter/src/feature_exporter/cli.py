"""Command line for the feature exporter."""

import argparse
import sys

from .export import ExtractorDescriptor, export_features


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="synthct-export-features",
        description="Embed every slice of a manifest with a CNN backbone and "
        "write a FEAT feature file for synthct-eval.",
    )
    parser.add_argument("--manifest", required=True, help="ImageSet manifest JSON.")
    parser.add_argument("--out", required=True, help="Output .feat path.")
    parser.add_argument(
        "--weights", default=None,
        help="Backbone state-dict path; omit for deterministic random init.",
    )
    parser.add_argument("--batch", type=int, default=8, help="Inference batch size.")
    parser.add_argument(
        "--resize", type=int, default=299, help="Square input size fed to the backbone."
    )
    args = parser.parse_args(argv)

    descriptor = ExtractorDescriptor(
        resize=args.resize,
        weights=str(args.weights) if args.weights else ExtractorDescriptor().weights,
    )
    try:
        data = export_features(
            args.manifest, args.out, weights=args.weights,
            batch_size=args.batch, descriptor=descriptor,
        )
    except Exception as exc:  # noqa: BLE001 - surface every failure by name
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: n={data.shape[0]}, d={data.shape[1]}")
    print(f"extractor: {descriptor.to_string()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
