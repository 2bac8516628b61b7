"""The boundary between the harness and community-detection algorithms.

External algorithms attach as subprocesses speaking protocol v1 over
stdin/stdout (see docs/protocol.md); the four builtin baselines run
in-process behind the same request/response surface. Every ok response is
validated into a proper partition before any metric sees it.
"""

from __future__ import annotations

import os
import shlex
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from . import protocol
from .baselines import BUILTINS
from .errors import CdbenchError, ProtocolError, ValidationError
from .graphs import Graph, load_dataset
from .hpo import SearchSpace, int_uniform
from .metrics import Partition

KIND_BUILTIN = "builtin"
KIND_EXTERNAL = "external"


@dataclass(frozen=True)
class RunnerSpec:
    name: str
    kind: str
    launch: tuple[str, ...] = ()
    search_space: SearchSpace = field(default_factory=SearchSpace)
    defaults: dict[str, Any] = field(default_factory=dict)
    protocol_version: int = protocol.PROTOCOL_VERSION
    memory_limit_mb: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in (KIND_BUILTIN, KIND_EXTERNAL):
            raise ValidationError(f"unknown runner kind {self.kind!r}")
        if self.kind == KIND_EXTERNAL and not self.launch:
            raise ValidationError("external runner needs a launch command")
        if self.kind == KIND_BUILTIN and self.name not in BUILTINS:
            raise ValidationError(f"unknown builtin {self.name!r}")


@dataclass(frozen=True)
class TrainRequest:
    dataset_path: str
    params: dict[str, Any]
    seed: int
    max_epochs: int
    patience: int
    k: int
    train_nodes: tuple[int, ...]
    val_nodes: tuple[int, ...]


@dataclass(frozen=True)
class TrainResponse:
    status: str
    partition: np.ndarray | None
    epochs_used: int
    wall_time: float
    message: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == protocol.STATUS_OK


@lru_cache(maxsize=16)
def _cached_graph(path: str) -> Graph:
    return load_dataset(path)


def _validate_partition(raw: Any, n: int, k: int) -> np.ndarray:
    arr = np.asarray(raw, dtype=np.int64)
    if arr.shape != (n,):
        raise ValidationError(f"partition has shape {arr.shape}, expected ({n},)")
    Partition(arr, k)  # range check
    return arr


def _run_builtin(spec: RunnerSpec, req: TrainRequest) -> TrainResponse:
    start = time.perf_counter()
    try:
        g = _cached_graph(req.dataset_path)
        fn = BUILTINS[spec.name]
        assignment, epochs = fn(
            g, req.k, dict(req.params), req.seed, req.max_epochs, req.patience
        )
        assignment = _validate_partition(assignment, g.n, req.k)
    except MemoryError:
        return TrainResponse(protocol.STATUS_OOM, None, 0, time.perf_counter() - start)
    except Exception as exc:
        return TrainResponse(
            protocol.STATUS_CRASH, None, 0, time.perf_counter() - start, str(exc)
        )
    return TrainResponse(
        protocol.STATUS_OK, assignment, int(epochs), time.perf_counter() - start
    )


class _ExternalSession:
    """One subprocess conversation: handshake, a train request, teardown.

    The child runs in its own process group so a timeout kill cannot leave
    orphans behind.
    """

    def __init__(self, spec: RunnerSpec) -> None:
        self.spec = spec
        limit_bytes = (
            spec.memory_limit_mb * 1024 * 1024 if spec.memory_limit_mb else None
        )

        def preexec() -> None:  # pragma: no cover - runs in the child
            os.setsid()
            if limit_bytes is not None:
                import resource

                resource.setrlimit(resource.RLIMIT_AS, (limit_bytes, limit_bytes))

        self.proc = subprocess.Popen(
            list(spec.launch),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            preexec_fn=preexec,
        )

    def kill(self) -> None:
        if self.proc.poll() is None:
            try:
                os.killpg(os.getpgid(self.proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                self.proc.kill()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover - defensive
            pass

    def close(self) -> None:
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self.kill()
        finally:
            if self.proc.stdout:
                self.proc.stdout.close()
            if self.proc.stderr:
                self.proc.stderr.close()

    def converse(self, req: TrainRequest) -> dict[str, Any]:
        """Handshake then one train round-trip; raises ProtocolError on any
        malformed traffic."""
        assert self.proc.stdin and self.proc.stdout
        protocol.write_message(self.proc.stdin, protocol.hello(self.spec.name))
        ack = protocol.read_message(self.proc.stdout)
        if ack is None:
            raise ProtocolError("runner closed the stream during handshake")
        if ack.get("type") != protocol.MSG_HELLO_ACK:
            raise ProtocolError(f"expected hello_ack, got {ack.get('type')!r}")
        if ack.get("protocol") != self.spec.protocol_version:
            raise ProtocolError(
                f"protocol version mismatch: harness {self.spec.protocol_version}, "
                f"runner {ack.get('protocol')!r}"
            )
        protocol.write_message(
            self.proc.stdin,
            protocol.train_message(
                dataset_path=req.dataset_path,
                params=dict(req.params),
                seed=req.seed,
                max_epochs=req.max_epochs,
                patience=req.patience,
                k=req.k,
                train_nodes=list(req.train_nodes),
                val_nodes=list(req.val_nodes),
            ),
        )
        result = protocol.read_message(self.proc.stdout)
        if result is None:
            raise ProtocolError("runner closed the stream before replying")
        if result.get("type") != protocol.MSG_RESULT:
            raise ProtocolError(f"expected result, got {result.get('type')!r}")
        return result


def _stderr_tail(session: _ExternalSession, limit: int = 2000) -> str:
    try:
        data = session.proc.stderr.read() if session.proc.stderr else b""
    except OSError:  # pragma: no cover - defensive
        data = b""
    return data.decode("utf-8", "replace")[-limit:]


def _run_external(spec: RunnerSpec, req: TrainRequest, timeout: float | None) -> TrainResponse:
    start = time.perf_counter()
    try:
        session = _ExternalSession(spec)
    except OSError as exc:
        return TrainResponse(protocol.STATUS_CRASH, None, 0, 0.0, f"launch failed: {exc}")

    box: dict[str, Any] = {}

    def talk() -> None:
        try:
            box["result"] = session.converse(req)
        except ProtocolError as exc:
            box["error"] = str(exc)
        except OSError as exc:
            box["error"] = f"pipe error: {exc}"

    worker = threading.Thread(target=talk, daemon=True)
    worker.start()
    worker.join(timeout)
    elapsed = time.perf_counter() - start
    if worker.is_alive():
        session.kill()
        worker.join(5)
        session.close()
        return TrainResponse(protocol.STATUS_TIMEOUT, None, 0, elapsed)

    if "error" in box:
        tail = _stderr_tail(session)
        session.close()
        status = protocol.STATUS_OOM if "MemoryError" in tail else protocol.STATUS_CRASH
        return TrainResponse(status, None, 0, elapsed, f"{box['error']}; stderr: {tail}".strip())

    result = box["result"]
    session.close()
    status = result.get("status")
    wall = float(result.get("wall_time") or elapsed)
    epochs = int(result.get("epochs_used") or 0)
    message = result.get("message")
    if status != protocol.STATUS_OK:
        if status not in (protocol.STATUS_OOM, protocol.STATUS_CRASH, protocol.STATUS_TIMEOUT):
            status = protocol.STATUS_CRASH
        return TrainResponse(status, None, epochs, wall, message)
    try:
        g = _cached_graph(req.dataset_path)
        assignment = _validate_partition(result.get("partition"), g.n, req.k)
    except (CdbenchError, ValueError, TypeError) as exc:
        return TrainResponse(protocol.STATUS_CRASH, None, epochs, wall, f"bad partition: {exc}")
    return TrainResponse(protocol.STATUS_OK, assignment, epochs, wall, message)


def train_and_predict(
    spec: RunnerSpec, req: TrainRequest, timeout: float | None = None
) -> TrainResponse:
    """Run one training job and return the validated response.

    Builtins execute in-process (they are trusted to be fast); external
    runners get a fresh subprocess, a wall-clock timeout and a process-group
    kill on expiry.
    """
    if spec.kind == KIND_BUILTIN:
        return _run_builtin(spec, req)
    return _run_external(spec, req, timeout)


@dataclass(frozen=True)
class PhaseResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ConformanceReport:
    runner: str
    phases: tuple[PhaseResult, ...]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.phases)

    def failing_phase(self) -> str | None:
        for p in self.phases:
            if not p.passed:
                return p.name
        return None


def _conformance_request(dataset_path: str, params: dict[str, Any], k: int, n: int) -> TrainRequest:
    nodes = list(range(n))
    cut = max(1, n // 5)
    return TrainRequest(
        dataset_path=dataset_path,
        params=params,
        seed=42,
        max_epochs=50,
        patience=10,
        k=k,
        train_nodes=tuple(nodes[2 * cut :]),
        val_nodes=tuple(nodes[cut : 2 * cut]),
    )


def _bad_params(space: SearchSpace) -> dict[str, Any]:
    """Parameters guaranteed to violate the declared space."""
    for dim in space.dimensions:
        if dim.parent is None:
            if dim.kind == "categorical":
                return {dim.name: "__out_of_domain__"}
            return {dim.name: "__not_a_number__"}
    return {"__unknown_parameter__": 1}


def _handshake_probe(spec: RunnerSpec) -> PhaseResult:
    if spec.kind == KIND_BUILTIN:
        return PhaseResult("handshake", True, "builtin dispatch")
    try:
        session = _ExternalSession(spec)
    except OSError as exc:
        return PhaseResult("handshake", False, f"launch failed: {exc}")
    try:
        assert session.proc.stdin and session.proc.stdout
        protocol.write_message(session.proc.stdin, protocol.hello(spec.name))
        ack = protocol.read_message(session.proc.stdout)
        if ack is None:
            return PhaseResult("handshake", False, "stream closed before hello_ack")
        if ack.get("type") != protocol.MSG_HELLO_ACK:
            return PhaseResult("handshake", False, f"expected hello_ack, got {ack.get('type')!r}")
        if ack.get("protocol") != spec.protocol_version:
            return PhaseResult(
                "handshake",
                False,
                f"protocol version mismatch: {ack.get('protocol')!r}",
            )
        if ack.get("name") != spec.name:
            return PhaseResult(
                "handshake",
                False,
                f"runner identifies as {ack.get('name')!r}, spec says {spec.name!r}",
            )
        return PhaseResult("handshake", True, f"protocol {spec.protocol_version}")
    except ProtocolError as exc:
        return PhaseResult("handshake", False, str(exc))
    finally:
        session.close()


def validate_runner(spec: RunnerSpec, dataset_path: str) -> ConformanceReport:
    """Exercise handshake, a tiny round-trip, response validation,
    determinism across identical requests, and failure injection."""
    g = load_dataset(dataset_path)
    req = _conformance_request(dataset_path, dict(spec.defaults), g.k, g.n)
    phases: list[PhaseResult] = []

    phases.append(_handshake_probe(spec))

    first = train_and_predict(spec, req, timeout=60.0)
    phases.append(
        PhaseResult(
            "train-round-trip",
            first.ok,
            f"status={first.status}" + (f" ({first.message})" if first.message else ""),
        )
    )
    phases.append(
        PhaseResult(
            "response-validation",
            first.ok and first.partition is not None and first.partition.shape == (g.n,),
            "partition length and range checked" if first.ok else "no ok response",
        )
    )

    second = train_and_predict(spec, req, timeout=60.0)
    deterministic = (
        first.ok
        and second.ok
        and np.array_equal(first.partition, second.partition)
    )
    phases.append(
        PhaseResult(
            "determinism",
            deterministic,
            "two identical requests gave identical partitions"
            if deterministic
            else "partitions differ across identical requests",
        )
    )

    bad_req = _conformance_request(dataset_path, _bad_params(spec.search_space), g.k, g.n)
    bad = train_and_predict(spec, bad_req, timeout=60.0)
    structured_failure = bad.status == protocol.STATUS_CRASH and bad.partition is None
    phases.append(
        PhaseResult(
            "failure-injection",
            structured_failure,
            f"status={bad.status}",
        )
    )
    return ConformanceReport(runner=spec.name, phases=tuple(phases))


def builtin_baselines() -> list[RunnerSpec]:
    """The four builtin baselines with their declared search spaces."""
    return [
        RunnerSpec(
            name="kmeans",
            kind=KIND_BUILTIN,
            search_space=SearchSpace(
                [int_uniform("n_restarts", 1, 8), int_uniform("max_iter", 20, 300)]
            ),
            defaults={"n_restarts": 3, "max_iter": 100},
        ),
        RunnerSpec(
            name="label_propagation",
            kind=KIND_BUILTIN,
            search_space=SearchSpace([int_uniform("max_rounds", 5, 100)]),
            defaults={"max_rounds": 30},
        ),
        RunnerSpec(
            name="greedy_modularity",
            kind=KIND_BUILTIN,
            search_space=SearchSpace(),
            defaults={},
        ),
        RunnerSpec(
            name="random",
            kind=KIND_BUILTIN,
            search_space=SearchSpace(),
            defaults={},
        ),
    ]


def external_spec(
    name: str,
    command: str | list[str] | tuple[str, ...],
    search_space: SearchSpace | None = None,
    defaults: dict[str, Any] | None = None,
    memory_limit_mb: int | None = None,
) -> RunnerSpec:
    launch = tuple(shlex.split(command)) if isinstance(command, str) else tuple(command)
    return RunnerSpec(
        name=name,
        kind=KIND_EXTERNAL,
        launch=launch,
        search_space=search_space or SearchSpace(),
        defaults=defaults or {},
        memory_limit_mb=memory_limit_mb,
    )
