"""Results persistence and report emission.

Cubes are stored as canonical JSON (sorted keys, no whitespace) so that a
deterministic benchmark run produces byte-identical files; writes go through
a temp file and an atomic rename. The column schemas of the report files
are documented in docs/formats.md.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .concordance import (
    Cell,
    ComparisonReport,
    ConcordanceReport,
    FailReason,
    ResultsCube,
    TestPoint,
)
from .errors import StoreParseError, StoreVersionError, ValidationError
from .metrics import MetricId, metric_from_name

FORMAT_VERSION = 1


@dataclass(frozen=True)
class StoredCube:
    format_version: int
    config_fingerprint: str
    created_at: str
    cube: ResultsCube


def _cube_to_payload(cube: ResultsCube) -> dict[str, Any]:
    values: list[list[list[Any]]] = []
    for i in range(len(cube.algorithms)):
        per_seed: list[list[Any]] = []
        for j in range(len(cube.seeds)):
            row: list[Any] = []
            for t in range(len(cube.tests)):
                reason = cube.failures.get((i, j, t))
                if reason is not None:
                    row.append(f"FAILED:{reason.value}")
                else:
                    row.append(float(cube.values[i, j, t]))
            per_seed.append(row)
        values.append(per_seed)
    return {
        "algorithms": list(cube.algorithms),
        "seeds": list(cube.seeds),
        "tests": [[t.dataset, t.metric.value] for t in cube.tests],
        "values": values,
    }


def _payload_to_cube(payload: dict[str, Any]) -> ResultsCube:
    try:
        algorithms = [str(a) for a in payload["algorithms"]]
        seeds = [int(s) for s in payload["seeds"]]
        tests = [
            TestPoint(str(d), metric_from_name(m)) for d, m in payload["tests"]
        ]
        values = payload["values"]
        cells: dict[tuple[str, int, TestPoint], Cell] = {}
        for i, alg in enumerate(algorithms):
            for j, seed in enumerate(seeds):
                for t, test in enumerate(tests):
                    raw = values[i][j][t]
                    if isinstance(raw, str):
                        if not raw.startswith("FAILED:"):
                            raise StoreParseError(f"bad cell value {raw!r}")
                        cells[(alg, seed, test)] = FailReason(raw[len("FAILED:") :])
                    else:
                        cells[(alg, seed, test)] = float(raw)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise StoreParseError(f"malformed cube payload: {exc}") from exc
    return ResultsCube(algorithms, seeds, tests, cells)


def config_fingerprint(payload: Any) -> str:
    """Stable hash of any JSON-serialisable configuration description."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_cube(
    cube: ResultsCube,
    path: str | Path,
    config_fingerprint: str = "",
    created_at: str = "",
) -> None:
    """Atomically write a cube. ``created_at`` defaults to empty so reruns
    of a deterministic benchmark produce byte-identical files; pass a
    timestamp explicitly to stamp the file."""
    document = {
        "format_version": FORMAT_VERSION,
        "config_fingerprint": config_fingerprint,
        "created_at": created_at,
        "cube": _cube_to_payload(cube),
    }
    blob = json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")
    _atomic_write(Path(path), blob + b"\n")


def load_stored(path: str | Path) -> StoredCube:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreParseError(f"cannot read {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreParseError(
            f"{path} is not valid JSON at byte {exc.pos}: {exc.msg}"
        ) from exc
    if not isinstance(document, dict) or "format_version" not in document:
        raise StoreParseError(f"{path} is not a stored cube document")
    version = document["format_version"]
    if version != FORMAT_VERSION:
        raise StoreVersionError(
            f"{path} uses format version {version}, this reader supports {FORMAT_VERSION}"
        )
    cube = _payload_to_cube(document.get("cube", {}))
    return StoredCube(
        format_version=int(version),
        config_fingerprint=str(document.get("config_fingerprint", "")),
        created_at=str(document.get("created_at", "")),
        cube=cube,
    )


def load_cube(path: str | Path) -> ResultsCube:
    return load_stored(path).cube


def cube_from_csv(path: str | Path) -> ResultsCube:
    """Build a cube from rows of (algorithm, seed, dataset, metric, value);
    value may be a number, FAILED, or FAILED:<reason>."""
    path = Path(path)
    cells: dict[tuple[str, int, TestPoint], Cell] = {}
    algorithms: list[str] = []
    seeds: list[int] = []
    tests: list[TestPoint] = []
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise StoreParseError(f"{path} is empty")
            expected = ["algorithm", "seed", "dataset", "metric", "value"]
            if [h.strip().lower() for h in header] != expected:
                raise StoreParseError(
                    f"{path} header must be {','.join(expected)}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 5:
                    raise StoreParseError(f"{path}:{lineno}: expected 5 columns")
                alg, seed_s, dataset, metric_s, value_s = (c.strip() for c in row)
                seed = int(seed_s)
                test = TestPoint(dataset, metric_from_name(metric_s))
                if alg not in algorithms:
                    algorithms.append(alg)
                if seed not in seeds:
                    seeds.append(seed)
                if test not in tests:
                    tests.append(test)
                cell: Cell
                if value_s.upper().startswith("FAILED"):
                    _, _, reason = value_s.partition(":")
                    cell = FailReason(reason.lower()) if reason else FailReason.CRASH
                else:
                    cell = float(value_s)
                key = (alg, seed, test)
                if key in cells:
                    raise StoreParseError(f"{path}:{lineno}: duplicate cell {key}")
                cells[key] = cell
    except (ValueError, KeyError, ValidationError) as exc:
        raise StoreParseError(f"{path}: {exc}") from exc
    try:
        return ResultsCube(algorithms, seeds, tests, cells)
    except ValidationError as exc:
        raise StoreParseError(f"{path}: {exc}") from exc


def _mean_std_failures(cube: ResultsCube, alg_idx: int, test_idx: int) -> tuple[float | None, float | None, int]:
    vals = cube.values[alg_idx, :, test_idx]
    ok = np.isfinite(vals)
    failures = int(len(cube.seeds) - ok.sum())
    if not ok.any():
        return None, None, failures
    sample = vals[ok]
    std = float(sample.std(ddof=1)) if sample.size > 1 else 0.0
    return float(sample.mean()), std, failures


def emit_report(
    cube: ResultsCube,
    concord: ConcordanceReport,
    cmp: ComparisonReport | None,
    out_dir: str | Path,
    second_concord: ConcordanceReport | None = None,
) -> list[Path]:
    """Write the human-readable performance tables, the consistency summary
    and the plot-ready CSV; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    datasets = sorted({t.dataset for t in cube.tests})
    metrics = [m for m in MetricId if any(t.metric is m for t in cube.tests)]

    # 1. per-dataset per-metric mean +/- std table
    lines: list[str] = []
    for dataset in datasets:
        lines.append(f"# dataset: {dataset}")
        header = ["algorithm"] + [m.value for m in metrics]
        lines.append("  ".join(f"{h:>22}" for h in header))
        for i, alg in enumerate(cube.algorithms):
            row = [f"{alg:>22}"]
            for metric in metrics:
                test = TestPoint(dataset, metric)
                if test not in cube.tests:
                    row.append(f"{'-':>22}")
                    continue
                t = cube.tests.index(test)
                mean, std, failures = _mean_std_failures(cube, i, t)
                if mean is None:
                    cell = f"FAILED x{failures}"
                else:
                    cell = f"{mean:.4f}+/-{std:.4f}"
                    if failures:
                        cell += f" ({failures} failed)"
                row.append(f"{cell:>22}")
            lines.append("  ".join(row))
        lines.append("")
    perf_txt = out / "performance.txt"
    perf_txt.write_text("\n".join(lines))
    written.append(perf_txt)

    # 2. consistency / comparison summary: one column per parameter regime
    if cmp:
        s_lines = [f"metric,{cmp.names[0]},{cmp.names[1]}"]
        w_second = second_concord.w_randomness if second_concord else float("nan")
        s_lines.append(
            f"w_randomness_coefficient,{concord.w_randomness:.6f},{w_second:.6f}"
        )
        s_lines.append(
            f"framework_comparison_rank,{cmp.mean_rank[0]:.6f}+/-{cmp.std_rank[0]:.6f},"
            f"{cmp.mean_rank[1]:.6f}+/-{cmp.std_rank[1]:.6f}"
        )
    else:
        s_lines = ["metric,value"]
        s_lines.append(f"w_randomness_coefficient,{concord.w_randomness:.6f}")
        if concord.w_randomness_tie_corrected is not None:
            s_lines.append(
                f"w_randomness_tie_corrected,{concord.w_randomness_tie_corrected:.6f}"
            )
        s_lines.append(f"tie_fraction,{concord.tie_fraction:.6f}")
    summary = out / "summary.csv"
    summary.write_text("\n".join(s_lines) + "\n")
    written.append(summary)

    # 3. plot-ready long-format CSV
    plot_path = out / "performance.csv"
    with plot_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["algorithm", "dataset", "metric", "mean", "std", "failures", "seeds"]
        )
        for i, alg in enumerate(cube.algorithms):
            for t, test in enumerate(cube.tests):
                mean, std, failures = _mean_std_failures(cube, i, t)
                writer.writerow(
                    [
                        alg,
                        test.dataset,
                        test.metric.value,
                        "" if mean is None else f"{mean:.10g}",
                        "" if std is None else f"{std:.10g}",
                        failures,
                        len(cube.seeds),
                    ]
                )
    written.append(plot_path)

    # 4. per-test concordance detail
    conc_path = out / "concordance.csv"
    with conc_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "metric", "kendall_w", "sum_sq_dev"])
        for test in cube.tests:
            writer.writerow(
                [
                    test.dataset,
                    test.metric.value,
                    f"{concord.per_test_w[test]:.10g}",
                    f"{concord.per_test_s[test]:.10g}",
                ]
            )
    written.append(conc_path)
    return written
