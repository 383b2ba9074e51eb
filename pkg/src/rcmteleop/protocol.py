"""Wire schema for the operator session: one UTF-8 JSON object per line.

Client -> server command messages carry exactly four top-level fields
(``kind``, ``seq``, ``t_client``, ``payload``); unknown extra fields are
ignored for forward compatibility.  Payload per kind:

- twist:      [vx, vy, vz, wx, wy, wz]  (m/s, rad/s, finite)
- gripper:    normalized opening in [0, 1]
- pedal:      [left, right] booleans
- set_rcm:    pivot offset from the tip (m, positive)
- set_config: partial controller config {alpha_t, alpha_r, gain_k, v_max,
              omega_max, r_in_c}; unknown keys ignored, bad values rejected

Server -> client frames are ``telemetry`` snapshots and ``error`` replies.
Decode failures raise typed errors whose ``code`` is one of syntax, schema,
range, sequence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

COMMAND_KINDS = ("twist", "gripper", "pedal", "set_rcm", "set_config")
_CONFIG_KEYS = ("alpha_t", "alpha_r", "gain_k", "v_max", "omega_max", "r_in_c")


class ProtocolError(ValueError):
    code = "protocol"


class MessageSyntaxError(ProtocolError):
    code = "syntax"


class SchemaError(ProtocolError):
    code = "schema"


class RangeError(ProtocolError):
    code = "range"


class SequenceError(ProtocolError):
    code = "sequence"


class BusyError(ProtocolError):
    code = "busy"


@dataclass(frozen=True)
class CommandMessage:
    kind: str
    seq: int
    t_client: float
    payload: object

    def to_obj(self):
        payload = self.payload
        if isinstance(payload, tuple):
            payload = list(payload)
        return {"kind": self.kind, "seq": self.seq, "t_client": self.t_client, "payload": payload}


def _require_number(value, name, minimum=None, maximum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{name} must be a number, got {type(value).__name__}")
    v = float(value)
    if not math.isfinite(v):
        raise RangeError(f"{name} must be finite")
    if minimum is not None and v < minimum:
        raise RangeError(f"{name} must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise RangeError(f"{name} must be <= {maximum}, got {v}")
    return v


def _decode_payload(kind, payload):
    if kind == "twist":
        if not isinstance(payload, list) or len(payload) != 6:
            raise SchemaError("twist payload must be a list of 6 numbers")
        return tuple(_require_number(v, f"twist[{i}]") for i, v in enumerate(payload))
    if kind == "gripper":
        return _require_number(payload, "gripper", 0.0, 1.0)
    if kind == "pedal":
        if (
            not isinstance(payload, list)
            or len(payload) != 2
            or not all(isinstance(v, bool) for v in payload)
        ):
            raise SchemaError("pedal payload must be [left, right] booleans")
        return (payload[0], payload[1])
    if kind == "set_rcm":
        v = _require_number(payload, "set_rcm", 0.0)
        if v == 0.0:
            raise RangeError("set_rcm offset must be positive")
        return v
    if kind == "set_config":
        if not isinstance(payload, dict):
            raise SchemaError("set_config payload must be an object")
        out = {}
        for key, value in payload.items():
            if key not in _CONFIG_KEYS:
                continue  # forward compatibility
            if key == "r_in_c":
                if (
                    not isinstance(value, list)
                    or len(value) != 3
                    or any(not isinstance(row, list) or len(row) != 3 for row in value)
                ):
                    raise SchemaError("r_in_c must be a 3x3 nested list")
                out[key] = [
                    [_require_number(v, f"r_in_c[{i}][{j}]") for j, v in enumerate(row)]
                    for i, row in enumerate(value)
                ]
            else:
                v = _require_number(value, key)
                if v <= 0.0:
                    raise RangeError(f"{key} must be positive, got {v}")
                out[key] = v
        return out
    raise SchemaError(f"unknown kind {kind!r}")


def decode(data, last_seq=None) -> CommandMessage:
    """Parse one message line; raises typed errors on malformed input.

    When last_seq is given, the sequence number must be strictly greater.
    Unknown top-level fields are ignored.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MessageSyntaxError(f"invalid UTF-8: {exc}") from None
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MessageSyntaxError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError("message must be a JSON object")
    for name in ("kind", "seq", "t_client", "payload"):
        if name not in obj:
            raise SchemaError(f"missing field {name!r}")
    kind = obj["kind"]
    if not isinstance(kind, str) or kind not in COMMAND_KINDS:
        raise SchemaError(f"kind must be one of {COMMAND_KINDS}, got {kind!r}")
    seq = obj["seq"]
    if isinstance(seq, bool) or not isinstance(seq, int):
        raise SchemaError("seq must be an integer")
    if seq < 0:
        raise RangeError(f"seq must be nonnegative, got {seq}")
    if last_seq is not None and seq <= last_seq:
        raise SequenceError(f"stale seq {seq} (last applied {last_seq})")
    t_client = _require_number(obj["t_client"], "t_client", 0.0)
    payload = _decode_payload(kind, obj["payload"])
    return CommandMessage(kind=kind, seq=seq, t_client=t_client, payload=payload)


def encode(msg: CommandMessage) -> bytes:
    """Serialize a command message as one newline-terminated JSON line."""
    return (json.dumps(msg.to_obj(), separators=(",", ":")) + "\n").encode("utf-8")


@dataclass(frozen=True)
class TelemetryFrame:
    """Per-tick state snapshot streamed back to the operator."""

    t: float
    tick: int
    ee_pos: tuple
    ee_quat: tuple
    tip: tuple
    jaw: float
    rcm_drift: float
    clearance: float
    enabled: bool
    commanded_twist: tuple
    gated_twist: tuple
    last_seq_applied: int

    def to_obj(self):
        return {
            "kind": "telemetry",
            "t": self.t,
            "tick": self.tick,
            "ee_pos": list(self.ee_pos),
            "ee_quat": list(self.ee_quat),
            "tip": list(self.tip),
            "jaw": self.jaw,
            "rcm_drift": self.rcm_drift,
            "clearance": self.clearance,
            "enabled": self.enabled,
            "commanded_twist": list(self.commanded_twist),
            "gated_twist": list(self.gated_twist),
            "last_seq_applied": self.last_seq_applied,
        }


def encode_telemetry(frame: TelemetryFrame) -> bytes:
    return (json.dumps(frame.to_obj(), separators=(",", ":")) + "\n").encode("utf-8")


def encode_error(exc, seq=None) -> bytes:
    code = getattr(exc, "code", "protocol")
    obj = {"kind": "error", "code": code, "detail": str(exc)}
    if seq is not None:
        obj["seq"] = seq
    return (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")


@dataclass
class CommandHold:
    """Latest-wins input latch with twist staleness decay.

    Twist commands expire to zero after the staleness horizon (a velocity
    command older than that is a hazard, not a backlog); gripper and pedal
    states latch until explicitly changed.  Times are the control loop's
    logical clock.
    """

    staleness_horizon: float = 0.2
    twist: tuple = (0.0,) * 6
    twist_time: float | None = None
    gripper: float = 0.0
    pedals: tuple = (False, False)

    def observe(self, msg: CommandMessage, now: float):
        if msg.kind == "twist":
            self.twist = msg.payload
            self.twist_time = now
        elif msg.kind == "gripper":
            self.gripper = msg.payload
        elif msg.kind == "pedal":
            self.pedals = msg.payload

    def effective_twist(self, now: float) -> tuple:
        if self.twist_time is None or now - self.twist_time > self.staleness_horizon:
            return (0.0,) * 6
        return self.twist

    def release_all(self):
        """Operator gone: drop pedals and zero the held twist immediately."""
        self.pedals = (False, False)
        self.twist = (0.0,) * 6
        self.twist_time = None
