"""Plain-text benchmark configuration files.

One ``key = value`` pair per line, ``#`` comments, comma-separated lists.
The resource keys mirror the benchmark's canonical budget table; external
runners are declared with dotted keys. Full grammar in docs/cli.md.

Example::

    mode = hpo
    datasets = data/planted_easy, data/karate
    runners = kmeans, label_propagation, greedy_modularity, random
    metrics = f1, nmi, modularity, conductance
    seeds = 42, 24, 976, 12345, 98765, 7, 856, 90, 672, 785
    max_trials = 300
    external.mygnn.launch = python -m my_adapter
    external.mygnn.defaults = learning_rate=0.01, weight_decay=0.0, patience=100
"""

from __future__ import annotations

import shlex
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .hpo import SearchSpace, categorical
from .metrics import metric_from_name
from .orchestrator import MODE_DEFAULT, MODE_HPO, BenchmarkConfig, ResourceConfig
from .runner import RunnerSpec, builtin_baselines, external_spec

_RESOURCE_KEYS = {
    "learning_rate",
    "weight_decay",
    "max_epochs",
    "patience",
    "max_trials",
    "seeds",
    "train_split",
    "val_split",
    "timeout",
    "optimizer",
    "default_patience",
}
_TOP_KEYS = {"mode", "datasets", "runners", "metrics", "workers", "study_per_test"}


def _parse_scalar(token: str) -> Any:
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    if token.lower() in ("true", "false"):
        return token.lower() == "true"
    return token


def _parse_list(raw: str) -> list[Any]:
    return [_parse_scalar(tok) for tok in raw.split(",") if tok.strip()]


def _parse_lines(text: str, where: str = "config") -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{where}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{where}:{lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{where}:{lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def parse_config_text(text: str, base_dir: Path | None = None) -> BenchmarkConfig:
    return config_from_entries(_parse_lines(text), base_dir=base_dir)


def config_from_entries(
    entries: dict[str, str], base_dir: Path | None = None
) -> BenchmarkConfig:
    externals: dict[str, dict[str, str]] = {}
    plain: dict[str, str] = {}
    for key, value in entries.items():
        if key.startswith("external."):
            parts = key.split(".")
            if len(parts) != 3 or parts[2] not in ("launch", "defaults", "memory_limit_mb"):
                raise ConfigError(
                    f"external runner keys look like external.<name>.launch, got {key!r}"
                )
            externals.setdefault(parts[1], {})[parts[2]] = value
        elif key in _RESOURCE_KEYS or key in _TOP_KEYS:
            plain[key] = value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")

    resource_kwargs: dict[str, Any] = {}
    if "learning_rate" in plain:
        resource_kwargs["learning_rates"] = tuple(float(v) for v in _parse_list(plain["learning_rate"]))
    if "weight_decay" in plain:
        resource_kwargs["weight_decays"] = tuple(float(v) for v in _parse_list(plain["weight_decay"]))
    if "max_epochs" in plain:
        resource_kwargs["max_epochs"] = int(plain["max_epochs"])
    if "patience" in plain:
        resource_kwargs["patience_options"] = tuple(int(v) for v in _parse_list(plain["patience"]))
    if "max_trials" in plain:
        resource_kwargs["max_trials"] = int(plain["max_trials"])
    if "seeds" in plain:
        resource_kwargs["seeds"] = tuple(int(v) for v in _parse_list(plain["seeds"]))
    if "train_split" in plain:
        resource_kwargs["train_split"] = float(plain["train_split"])
    if "val_split" in plain:
        resource_kwargs["val_split"] = float(plain["val_split"])
    if "timeout" in plain:
        resource_kwargs["timeout"] = float(plain["timeout"])
    if "optimizer" in plain:
        resource_kwargs["optimizer"] = str(plain["optimizer"])
    if "default_patience" in plain:
        resource_kwargs["default_patience"] = int(plain["default_patience"])
    try:
        resources = ResourceConfig(**resource_kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    mode = plain.get("mode", MODE_HPO).strip().lower()
    if mode in ("default", "defaults", MODE_DEFAULT):
        mode = MODE_DEFAULT
    elif mode == MODE_HPO:
        mode = MODE_HPO
    else:
        raise ConfigError(f"mode must be 'hpo' or 'default-params', got {mode!r}")

    if "datasets" not in plain:
        raise ConfigError("config needs a 'datasets' key")
    datasets = []
    for tok in plain["datasets"].split(","):
        tok = tok.strip()
        if not tok:
            continue
        path = Path(tok)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        datasets.append(str(path))

    builtin_by_name = {spec.name: spec for spec in builtin_baselines()}
    runner_names = [
        tok.strip() for tok in plain.get("runners", "").split(",") if tok.strip()
    ]
    if not runner_names:
        runner_names = sorted(builtin_by_name)
    runners: list[RunnerSpec] = []
    table_space = SearchSpace(
        [
            categorical("learning_rate", resources.learning_rates),
            categorical("weight_decay", resources.weight_decays),
            categorical("patience", resources.patience_options),
        ]
    )
    for name in runner_names:
        if name in builtin_by_name:
            runners.append(builtin_by_name[name])
        elif name in externals:
            decl = externals[name]
            if "launch" not in decl:
                raise ConfigError(f"external runner {name!r} needs a launch command")
            defaults: dict[str, Any] = {}
            for tok in decl.get("defaults", "").split(","):
                tok = tok.strip()
                if not tok:
                    continue
                if "=" not in tok:
                    raise ConfigError(
                        f"defaults for {name!r} must be key=value pairs, got {tok!r}"
                    )
                pkey, _, pval = tok.partition("=")
                defaults[pkey.strip()] = _parse_scalar(pval)
            runners.append(
                external_spec(
                    name,
                    shlex.split(decl["launch"]),
                    search_space=table_space,
                    defaults=defaults,
                    memory_limit_mb=int(decl["memory_limit_mb"])
                    if "memory_limit_mb" in decl
                    else None,
                )
            )
        else:
            raise ConfigError(
                f"runner {name!r} is neither a builtin nor a declared external"
            )
    declared_unused = set(externals) - set(runner_names)
    if declared_unused:
        raise ConfigError(
            f"external runner(s) declared but not listed in 'runners': {sorted(declared_unused)}"
        )

    metrics = tuple(
        metric_from_name(tok)
        for tok in plain.get("metrics", "f1, nmi, modularity, conductance").split(",")
        if tok.strip()
    )
    workers = int(plain.get("workers", "1"))
    study_per_test = str(plain.get("study_per_test", "false")).lower() == "true"

    return BenchmarkConfig(
        datasets=tuple(datasets),
        runners=tuple(runners),
        metrics=metrics,
        resources=resources,
        mode=mode,
        workers=workers,
        study_per_test=study_per_test,
    )


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> BenchmarkConfig:
    """Parse a config file; ``overrides`` replace individual keys (CLI
    ``--set key=value`` flags take precedence over the file)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    entries = _parse_lines(path.read_text(), where=str(path))
    if overrides:
        entries.update(overrides)
    return config_from_entries(entries, base_dir=path.parent)


def config_description(cfg: BenchmarkConfig) -> dict[str, Any]:
    """JSON-serialisable description used for the stored-cube fingerprint."""
    return {
        "mode": cfg.mode,
        "datasets": list(cfg.datasets),
        "runners": [
            {
                "name": r.name,
                "kind": r.kind,
                "launch": list(r.launch),
                "defaults": {k: r.defaults[k] for k in sorted(r.defaults)},
            }
            for r in cfg.runners
        ],
        "metrics": [m.value for m in cfg.metrics],
        "resources": {
            "learning_rates": list(cfg.resources.learning_rates),
            "weight_decays": list(cfg.resources.weight_decays),
            "max_epochs": cfg.resources.max_epochs,
            "patience_options": list(cfg.resources.patience_options),
            "max_trials": cfg.resources.max_trials,
            "seeds": list(cfg.resources.seeds),
            "train_split": cfg.resources.train_split,
            "val_split": cfg.resources.val_split,
            "timeout": cfg.resources.timeout,
            "optimizer": cfg.resources.optimizer,
            "default_patience": cfg.resources.default_patience,
        },
        "study_per_test": cfg.study_per_test,
    }
