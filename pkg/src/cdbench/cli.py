"""Command line entry point.

Exit codes: 0 success, 1 unexpected runtime failure, 2 usage error,
3 input/config/storage problems, 4 conformance or comparison failure.
Every command accepts ``--json`` and then emits exactly one JSON document
on stdout. See docs/cli.md.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from .concordance import w_randomness_coefficient
from .config import config_description, load_config
from .datasets import (
    PUBLIC_DATASETS,
    fetch_public_dataset,
    generate_offline_datasets,
)
from .errors import (
    AlignmentError,
    CdbenchError,
    ConfigError,
    LoadError,
    ShapeError,
    StoreParseError,
    StoreVersionError,
    UndefinedInputError,
    ValidationError,
)
from .graphs import dataset_summary, load_dataset
from .orchestrator import compare_cubes, run_benchmark
from .runner import builtin_baselines, external_spec, validate_runner
from .store import (
    config_fingerprint,
    cube_from_csv,
    emit_report,
    load_cube,
    save_cube,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_CHECK_FAILED = 4

_INPUT_ERRORS = (
    LoadError,
    ShapeError,
    ValidationError,
    ConfigError,
    StoreParseError,
    StoreVersionError,
    AlignmentError,
    UndefinedInputError,
)


def _emit(args: argparse.Namespace, document: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(document, sort_keys=True))
    else:
        print(text)


def cmd_stats(args: argparse.Namespace) -> int:
    summary = dataset_summary(load_dataset(args.dataset))
    doc = {
        "name": summary.name,
        "nodes": summary.nodes,
        "edges": summary.edges,
        "undirected_edges": summary.undirected_edges,
        "features": summary.features,
        "classes": summary.classes,
        "avg_clustering_coefficient": summary.avg_clustering_coefficient,
        "mean_closeness_centrality": summary.mean_closeness_centrality,
    }
    text = "\n".join(
        [
            f"name: {summary.name}",
            f"nodes: {summary.nodes}",
            f"edges: {summary.edges} ({summary.undirected_edges} undirected)",
            f"features: {summary.features}",
            f"classes: {summary.classes}",
            f"avg clustering coefficient: {summary.avg_clustering_coefficient:.3f}",
            f"mean closeness centrality: {summary.mean_closeness_centrality:.3f}",
        ]
    )
    _emit(args, doc, text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    cfg = load_config(args.config, overrides)
    cube = run_benchmark(cfg)
    stamp = (
        datetime.now(timezone.utc).isoformat(timespec="seconds")
        if args.stamp
        else ""
    )
    save_cube(
        cube,
        args.out,
        config_fingerprint=config_fingerprint(config_description(cfg)),
        created_at=stamp,
    )
    doc = {
        "out": str(args.out),
        "algorithms": list(cube.algorithms),
        "seeds": list(cube.seeds),
        "tests": len(cube.tests),
        "failures": len(cube.failures),
    }
    _emit(
        args,
        doc,
        f"wrote {args.out}: {len(cube.algorithms)} algorithms x "
        f"{len(cube.seeds)} seeds x {len(cube.tests)} tests "
        f"({len(cube.failures)} failed cells)",
    )
    return EXIT_OK


def _load_cube_or_csv(path: str):
    p = Path(path)
    if p.suffix.lower() == ".csv":
        return cube_from_csv(p)
    return load_cube(p)


def cmd_rank(args: argparse.Namespace) -> int:
    cube = _load_cube_or_csv(args.results)
    report = w_randomness_coefficient(cube)
    doc = {
        "w_randomness_coefficient": report.w_randomness,
        "tie_fraction": report.tie_fraction,
        "w_randomness_tie_corrected": report.w_randomness_tie_corrected,
        "per_test_w": {str(t): w for t, w in report.per_test_w.items()},
        "all_failed_rows": report.all_failed_rows,
    }
    lines = [f"W Randomness Coefficient: {report.w_randomness:.3f}"]
    if report.w_randomness_tie_corrected is not None:
        lines.append(
            f"  tie-corrected: {report.w_randomness_tie_corrected:.3f} "
            f"(ties in {report.tie_fraction:.1%} of comparisons)"
        )
    for test, w in sorted(report.per_test_w.items(), key=lambda kv: str(kv[0])):
        lines.append(f"  {test}: W = {w:.3f}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cube_a = _load_cube_or_csv(args.cube_a)
    cube_b = _load_cube_or_csv(args.cube_b)
    cmp_report, conc_a, conc_b = compare_cubes(cube_a, cube_b)
    doc = {
        "framework_comparison_rank": {
            cmp_report.names[0]: {
                "mean": cmp_report.mean_rank[0],
                "std": cmp_report.std_rank[0],
            },
            cmp_report.names[1]: {
                "mean": cmp_report.mean_rank[1],
                "std": cmp_report.std_rank[1],
            },
        },
        "w_randomness_coefficient": {
            cmp_report.names[0]: conc_a.w_randomness,
            cmp_report.names[1]: conc_b.w_randomness,
        },
    }
    text = "\n".join(
        [
            f"{'':>28}{cmp_report.names[0]:>14}{cmp_report.names[1]:>14}",
            f"{'W Randomness Coefficient':>28}"
            f"{conc_a.w_randomness:>14.3f}{conc_b.w_randomness:>14.3f}",
            f"{'Framework Comparison Rank':>28}"
            f"{cmp_report.mean_rank[0]:>8.3f}+/-{cmp_report.std_rank[0]:.2f}"
            f"{cmp_report.mean_rank[1]:>8.3f}+/-{cmp_report.std_rank[1]:.2f}",
        ]
    )
    _emit(args, doc, text)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cube = _load_cube_or_csv(args.cube)
    concord = w_randomness_coefficient(cube)
    cmp_report = None
    second = None
    if args.compare_with:
        other = _load_cube_or_csv(args.compare_with)
        cmp_report, concord, second = compare_cubes(cube, other)
    files = emit_report(cube, concord, cmp_report, args.out, second_concord=second)
    doc = {"written": [str(f) for f in files]}
    _emit(args, doc, "\n".join(f"wrote {f}" for f in files))
    return EXIT_OK


def cmd_validate_runner(args: argparse.Namespace) -> int:
    builtin = {spec.name: spec for spec in builtin_baselines()}
    if args.runner in builtin:
        spec = builtin[args.runner]
    else:
        spec = external_spec(args.name or Path(args.runner.split()[0]).stem, args.runner)
    if args.dataset:
        report = validate_runner(spec, args.dataset)
    else:
        from .datasets import make_conformance_bundle

        with tempfile.TemporaryDirectory(prefix="cdbench-conformance-") as tmp:
            bundle = make_conformance_bundle(Path(tmp) / "conformance")
            report = validate_runner(spec, str(bundle))
    doc = {
        "runner": report.runner,
        "passed": report.passed,
        "phases": [
            {"name": p.name, "passed": p.passed, "detail": p.detail}
            for p in report.phases
        ],
    }
    lines = [f"runner {report.runner}: {'PASS' if report.passed else 'FAIL'}"]
    for p in report.phases:
        mark = "ok " if p.passed else "FAIL"
        lines.append(f"  [{mark}] {p.name}" + (f" - {p.detail}" if p.detail else ""))
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_fetch_datasets(args: argparse.Namespace) -> int:
    dest = Path(args.dest)
    results: dict[str, str] = {}
    if args.which in ("all", "offline"):
        for bundle in generate_offline_datasets(dest):
            results[bundle.name] = "generated"
    if args.which in ("all", "public"):
        for name in PUBLIC_DATASETS:
            try:
                fetch_public_dataset(name, dest, base_url=args.base_url)
                results[name] = "downloaded"
            except CdbenchError as exc:
                results[name] = f"failed: {exc}"
    doc = {"dest": str(dest), "datasets": results}
    lines = [f"{name}: {status}" for name, status in results.items()]
    _emit(args, doc, "\n".join(lines))
    failed = [n for n, s in results.items() if s.startswith("failed")]
    if failed and args.which == "public":
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdbench",
        description="Benchmark harness for graph community-detection algorithms",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="print a dataset summary")
    p.add_argument("dataset", help="dataset bundle directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("run", help="execute a benchmark config and store the cube")
    p.add_argument("config", help="benchmark config file")
    p.add_argument("--out", required=True, help="output cube path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--stamp", action="store_true",
                   help="record the wall-clock time in the cube file "
                        "(breaks byte-identical reruns)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("rank", help="consistency report for a cube or CSV")
    p.add_argument("results", help="stored cube or CSV of algorithm,seed,dataset,metric,value")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("compare", help="framework comparison rank of two cubes")
    p.add_argument("cube_a", help="first cube (e.g. default parameters)")
    p.add_argument("cube_b", help="second cube (e.g. tuned parameters)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("report", help="write report files for a cube")
    p.add_argument("cube")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--compare-with", help="second cube for the two-column summary")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("validate-runner", help="conformance-check a runner")
    p.add_argument("runner", help="builtin name or launch command")
    p.add_argument("--name", help="expected runner name for externals")
    p.add_argument("--dataset", help="bundle to use (default: generated tiny one)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_validate_runner)

    p = sub.add_parser("fetch-datasets", help="generate/download dataset bundles")
    p.add_argument("--dest", default="data", help="destination directory")
    p.add_argument("--which", choices=["all", "offline", "public"], default="all")
    p.add_argument("--base-url", default=None, help="override the public dataset base URL")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_fetch_datasets)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "base_url", None) is None and args.command == "fetch-datasets":
        from .datasets import PUBLIC_DATASET_BASE

        args.base_url = PUBLIC_DATASET_BASE
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CdbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
