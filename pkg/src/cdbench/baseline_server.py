"""Serve a builtin baseline over the runner protocol.

    python -m cdbench.baseline_server <builtin-name>

This is the reference external runner: the conformance suite uses it to
exercise the full subprocess path, and it documents by example what a
conforming runner must do. Exits cleanly on EOF.
"""

from __future__ import annotations

import sys
import time

from . import protocol
from .baselines import BUILTINS
from .errors import ProtocolError
from .graphs import load_dataset
from .metrics import Partition


def serve_builtin(name: str, stdin=None, stdout=None) -> int:
    if name not in BUILTINS:
        print(f"unknown builtin {name!r}", file=sys.stderr)
        return 2
    fn = BUILTINS[name]
    inp = stdin if stdin is not None else sys.stdin.buffer
    out = stdout if stdout is not None else sys.stdout.buffer
    graph_cache: dict[str, object] = {}
    while True:
        try:
            msg = protocol.read_message(inp)
        except ProtocolError as exc:
            protocol.write_message(out, {"type": protocol.MSG_ERROR, "message": str(exc)})
            return 1
        if msg is None:
            return 0
        mtype = msg.get("type")
        if mtype == protocol.MSG_HELLO:
            protocol.write_message(out, protocol.hello_ack(name))
            continue
        if mtype != protocol.MSG_TRAIN:
            protocol.write_message(
                out, {"type": protocol.MSG_ERROR, "message": f"unexpected message {mtype!r}"}
            )
            return 1
        start = time.perf_counter()
        try:
            path = msg["dataset_path"]
            g = graph_cache.get(path)
            if g is None:
                g = load_dataset(path)
                graph_cache[path] = g
            assignment, epochs = fn(
                g,
                int(msg["k"]),
                dict(msg["params"]),
                int(msg["seed"]),
                int(msg["max_epochs"]),
                int(msg["patience"]),
            )
            Partition(assignment, int(msg["k"]))
            protocol.write_message(
                out,
                protocol.result_message(
                    protocol.STATUS_OK,
                    [int(v) for v in assignment],
                    int(epochs),
                    time.perf_counter() - start,
                ),
            )
        except MemoryError:
            protocol.write_message(
                out,
                protocol.result_message(
                    protocol.STATUS_OOM, None, 0, time.perf_counter() - start
                ),
            )
        except Exception as exc:
            protocol.write_message(
                out,
                protocol.result_message(
                    protocol.STATUS_CRASH,
                    None,
                    0,
                    time.perf_counter() - start,
                    message=str(exc),
                ),
            )


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        print("usage: python -m cdbench.baseline_server <builtin-name>", file=sys.stderr)
        return 2
    return serve_builtin(args[0])


if __name__ == "__main__":
    sys.exit(main())
