"""Command line entry point: config-driven stages plus the workbench server.

Exit codes: 0 success, 2 validation/config error, 3 data error, 4 internal.
GEOCLUSTER_LOG sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import PipelineConfig, load_config, run_id_for
from .errors import ConfigError, DataError, GeoClusterError
from .pipeline import (
    CacheStore, build_report, run_pipeline, stage_cluster, stage_compare,
    stage_evaluate, stage_ingest,
)

log = logging.getLogger("geocluster.cli")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _parse_forced(values) -> dict[str, int]:
    forced = {}
    for value in values or []:
        if "=" not in value:
            raise ConfigError(f"--forced-k expects NAME=K, got {value!r}")
        name, _, k = value.partition("=")
        try:
            forced[name] = int(k)
        except ValueError:
            raise ConfigError(f"--forced-k expects an integer k, got {value!r}") from None
    return forced


def _load(args) -> PipelineConfig:
    config = load_config(args.config)
    if getattr(args, "out", None):
        config.output_dir = Path(args.out)
    if getattr(args, "strict_geo", False):
        config.geo.strict = True
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def cmd_run(args) -> int:
    config = _load(args)
    report = run_pipeline(
        config,
        threshold=args.threshold,
        forced=_parse_forced(args.forced_k),
    )
    print(f"run {report.run_id} complete; artifacts in {config.output_dir}")
    for name, d in sorted(report.datasets.items()):
        print(f"  {name}: selected {d['selected']}"
              + (" (forced k)" if d["forced"] else ""))
    for row in report.comparison.get("flagged", []):
        print(f"  flagged {row['area']}: gap {row['gap']:+d}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    config = _load(args)
    ingest = stage_ingest(config)
    CacheStore(config).save_ingest(ingest)
    for name, bundle in sorted(ingest.bundles.items()):
        n = bundle.base_frame.n_entities if bundle.base_frame else len(bundle.records)
        print(f"{name}: {n} entities ({bundle.kind})")
    if ingest.warnings:
        print(f"{len(ingest.warnings)} warnings")
    return EXIT_OK


def cmd_cluster(args) -> int:
    config = _load(args)
    cache = CacheStore(config)
    ingest = cache.load_ingest(needed_by="cluster")
    clusters = stage_cluster(config, ingest)
    cache.save_cluster(clusters)
    for name, dc in sorted(clusters.datasets.items()):
        print(f"{name}: {len(dc.candidates)} candidates over {len(dc.frames)} frames")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .report import model_grid_markdown

    config = _load(args)
    cache = CacheStore(config)
    clusters = cache.load_cluster(needed_by="evaluate")
    evaluated = stage_evaluate(config, clusters, forced=_parse_forced(args.forced_k))
    cache.save_evaluate(evaluated)
    print(model_grid_markdown(evaluated))
    return EXIT_OK


def cmd_compare(args) -> int:
    from .report import rag_markdown

    config = _load(args)
    cache = CacheStore(config)
    ingest = cache.load_ingest(needed_by="compare")
    evaluated = cache.load_evaluate(needed_by="compare")
    compared = stage_compare(config, ingest, evaluated, threshold=args.threshold)
    cache.save_compare(compared)
    names = {}
    for bundle in ingest.bundles.values():
        names.update(bundle.entity_names)
    print(rag_markdown(compared, names))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import emit_artifacts

    config = _load(args)
    cache = CacheStore(config)
    ingest = cache.load_ingest(needed_by="report")
    evaluated = cache.load_evaluate(needed_by="report")
    compared = cache.load_compare(needed_by="report")
    report = build_report(run_id_for(config), config, ingest, evaluated,
                          compared, timings={})
    written = emit_artifacts(config, ingest, evaluated, compared, report)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import build_app

    config = _load(args)
    static = Path(args.static) if args.static else None
    app = build_app(config, write_through=True, static_dir=static)
    uvicorn.run(app, host="127.0.0.1", port=args.serve_port, log_level="info")
    return EXIT_OK


def cmd_demo(args) -> int:
    from .demo import write_demo_inputs

    config_path = write_demo_inputs(Path(args.dir), seed=args.seed or 7)
    print(f"demo inputs written; run: geocluster run --config {config_path}")
    return EXIT_OK


def _add_common(parser, threshold=False, forced=False):
    parser.add_argument("--config", required=True, help="pipeline config YAML")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--strict-geo", action="store_true",
                        help="fail on unmapped locations")
    parser.add_argument("--seed", type=int, help="master seed override")
    if threshold:
        parser.add_argument("--threshold", type=int, default=None,
                            help="discrepancy gap threshold")
    if forced:
        parser.add_argument("--forced-k", action="append", metavar="NAME=K",
                            help="force k for a dataset (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geocluster",
        description="Geospatial clustering workbench for regional business statistics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute the full pipeline")
    _add_common(p, threshold=True, forced=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="ingest + geo + derived indices")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="fit the candidate grid")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("evaluate", help="score candidates and select models")
    _add_common(p, forced=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="intensity labels, RAG table, discrepancies")
    _add_common(p, threshold=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="emit artifacts from cached stages")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="launch the workbench API")
    _add_common(p)
    p.add_argument("--serve-port", type=int, default=8787)
    p.add_argument("--static", help="directory of built workbench assets")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo", help="write the bundled synthetic fixture")
    p.add_argument("dir", help="target directory")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("GEOCLUSTER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GeoClusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
