"""Length-prefixed JSON message framing for the runner protocol (v1).

On the wire each message is: the decimal byte length of the payload in
ASCII, a single ``\\n``, then exactly that many bytes of UTF-8 JSON. The
message is a JSON object with a ``type`` field; see docs/protocol.md for
the byte-exact contract.
"""

from __future__ import annotations

import json
from typing import Any, BinaryIO

from .errors import ProtocolError

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 64 * 1024 * 1024

MSG_HELLO = "hello"
MSG_HELLO_ACK = "hello_ack"
MSG_TRAIN = "train"
MSG_RESULT = "result"
MSG_ERROR = "error"

STATUS_OK = "ok"
STATUS_OOM = "oom"
STATUS_TIMEOUT = "timeout"
STATUS_CRASH = "crash"


def write_message(stream: BinaryIO, message: dict[str, Any]) -> None:
    payload = json.dumps(message, sort_keys=True, separators=(",", ":")).encode("utf-8")
    stream.write(f"{len(payload)}\n".encode("ascii"))
    stream.write(payload)
    stream.flush()


def read_message(stream: BinaryIO) -> dict[str, Any] | None:
    """Read one framed message; returns None on clean EOF at a frame
    boundary, raises ProtocolError on anything malformed."""
    header = stream.readline()
    if header == b"":
        return None
    try:
        length = int(header.strip())
    except ValueError:
        raise ProtocolError(f"bad frame header {header[:40]!r}") from None
    if length < 0 or length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"frame length {length} out of range")
    payload = stream.read(length)
    if len(payload) != length:
        raise ProtocolError(
            f"truncated frame: expected {length} bytes, got {len(payload)}"
        )
    try:
        message = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolError("message must be a JSON object with a 'type' field")
    return message


def hello(name: str) -> dict[str, Any]:
    return {"type": MSG_HELLO, "protocol": PROTOCOL_VERSION, "name": name}


def hello_ack(name: str) -> dict[str, Any]:
    return {"type": MSG_HELLO_ACK, "protocol": PROTOCOL_VERSION, "name": name}


def train_message(
    dataset_path: str,
    params: dict[str, Any],
    seed: int,
    max_epochs: int,
    patience: int,
    k: int,
    train_nodes: list[int],
    val_nodes: list[int],
) -> dict[str, Any]:
    return {
        "type": MSG_TRAIN,
        "dataset_path": dataset_path,
        "params": params,
        "seed": seed,
        "max_epochs": max_epochs,
        "patience": patience,
        "k": k,
        "train_nodes": train_nodes,
        "val_nodes": val_nodes,
    }


def result_message(
    status: str,
    partition: list[int] | None,
    epochs_used: int,
    wall_time: float,
    message: str | None = None,
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "type": MSG_RESULT,
        "status": status,
        "partition": partition,
        "epochs_used": epochs_used,
        "wall_time": wall_time,
    }
    if message is not None:
        out["message"] = message
    return out
