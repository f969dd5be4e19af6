"""Historical transactions and state snapshots: fixture files, replay, serialization."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import jsonschema

from .evm.erc20 import EventLog
from .evm.interpreter import ExecResult, Tx, execute_transaction
from .evm.state import StateError, WorldState
from .words import hex_addr, parse_int

log = logging.getLogger(__name__)

_HEX = {"type": "string", "pattern": "^0x[0-9a-fA-F]*$"}
_INT = {"anyOf": [{"type": "integer", "minimum": 0}, _HEX]}

LOG_SCHEMA = {
    "type": "object",
    "required": ["address", "topics", "data"],
    "properties": {"address": _HEX, "topics": {"type": "array", "items": _HEX}, "data": _HEX},
    "additionalProperties": False,
}

RECORD_SCHEMA = {
    "type": "object",
    "required": ["hash", "from", "to", "calldata", "blockNumber", "status"],
    "properties": {
        "hash": {"type": "string"},
        "from": _HEX,
        "to": _HEX,
        "value": _INT,
        "calldata": _HEX,
        "blockNumber": {"type": "integer", "minimum": 0},
        "status": {"enum": ["success", "fail"]},
        "logs": {"type": "array", "items": LOG_SCHEMA},
        "internal_calls": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["caller", "callee", "calldata"],
                "properties": {"caller": _HEX, "callee": _HEX, "calldata": _HEX, "value": _INT},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

SNAPSHOT_SCHEMA = {
    "type": "object",
    "required": ["accounts"],
    "properties": {
        "block": {"type": "object"},
        "accounts": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "balance": _INT,
                    "nonce": _INT,
                    "codeHex": {"type": "string"},
                    "storage": {"type": "object", "additionalProperties": _INT},
                    "mockToken": {"type": "object"},
                },
                "additionalProperties": False,
            },
        },
    },
}

FIXTURE_SCHEMA = {
    "type": "object",
    "required": ["snapshots", "transactions"],
    "properties": {
        "name": {"type": "string"},
        "contract": _HEX,
        "snapshots": {"type": "object", "patternProperties": {"^[0-9]+$": SNAPSHOT_SCHEMA},
                      "additionalProperties": False},
        "transactions": {"type": "array", "items": RECORD_SCHEMA},
    },
    "additionalProperties": False,
}


class FixtureError(ValueError):
    """A fixture file that does not parse or does not match the schema."""


@dataclass(frozen=True)
class InternalCall:
    caller: int
    callee: int
    calldata: bytes
    value: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "caller": hex_addr(self.caller),
            "callee": hex_addr(self.callee),
            "calldata": "0x" + self.calldata.hex(),
            "value": hex(self.value),
        }


@dataclass
class TransactionRecord:
    hash: str
    sender: int  # the originating EOA
    to: int
    calldata: bytes
    block_number: int
    status: str = "success"
    value: int = 0
    logs: list[EventLog] = field(default_factory=list)
    internal_calls: list[InternalCall] | None = None

    @property
    def origin(self) -> int:
        return self.sender

    def tx(self) -> Tx:
        return Tx(self.sender, self.to, self.value, self.calldata)

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "hash": self.hash,
            "from": hex_addr(self.sender),
            "to": hex_addr(self.to),
            "value": hex(self.value),
            "calldata": "0x" + self.calldata.hex(),
            "blockNumber": self.block_number,
            "status": self.status,
            "logs": [lg.to_json() for lg in self.logs],
        }
        if self.internal_calls is not None:
            d["internal_calls"] = [c.to_json() for c in self.internal_calls]
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> TransactionRecord:
        calls = d.get("internal_calls")
        return cls(
            d["hash"],
            parse_int(d["from"]),
            parse_int(d["to"]),
            bytes.fromhex(d["calldata"][2:]),
            int(d["blockNumber"]),
            d["status"],
            parse_int(d.get("value", 0)),
            [_log_from_json(lg) for lg in d.get("logs", [])],
            None if calls is None else [
                InternalCall(parse_int(c["caller"]), parse_int(c["callee"]), bytes.fromhex(c["calldata"][2:]),
                             parse_int(c.get("value", 0)))
                for c in calls
            ],
        )


def _log_from_json(d: dict[str, Any]) -> EventLog:
    return EventLog(parse_int(d["address"]), tuple(parse_int(t) for t in d["topics"]), bytes.fromhex(d["data"][2:]))


def _where(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_fixture(doc: Any, source: str = "<fixture>") -> tuple[list[TransactionRecord], dict[int, WorldState]]:
    """Validate a decoded fixture document and build records and snapshots."""
    validator = jsonschema.Draft202012Validator(FIXTURE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise FixtureError(f"{source}: field {_where(e)}: {e.message}")
    snapshots: dict[int, WorldState] = {}
    for block_s, snap in doc["snapshots"].items():
        try:
            world = WorldState.from_json(snap)
        except (StateError, ValueError) as exc:
            raise FixtureError(f"{source}: field snapshots/{block_s}: {exc}") from exc
        world.block.number = int(block_s)
        snapshots[int(block_s)] = world
    records = []
    for i, d in enumerate(doc["transactions"]):
        rec = TransactionRecord.from_json(d)
        if rec.block_number not in snapshots:
            raise FixtureError(
                f"{source}: field transactions/{i}/blockNumber: no snapshot for block {rec.block_number}"
            )
        records.append(rec)
    return records, snapshots


def load_fixture(path: str | Path) -> tuple[list[TransactionRecord], dict[int, WorldState]]:
    """Read a fixture bundle: ``{"snapshots": {block: state}, "transactions": [...]}``."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return [], {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_fixture(doc, str(path))


def serialize(records: Iterable[TransactionRecord], snapshots: dict[int, WorldState],
              name: str | None = None, contract: int | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if name is not None:
        doc["name"] = name
    if contract is not None:
        doc["contract"] = hex_addr(contract)
    doc["snapshots"] = {str(b): snapshots[b].to_json() for b in sorted(snapshots)}
    doc["transactions"] = [r.to_json() for r in records]
    return doc


def normalize(doc: dict[str, Any]) -> dict[str, Any]:
    """Canonical form of a fixture document (what ``serialize(load(doc))`` yields)."""
    records, snapshots = parse_fixture(doc)
    return serialize(records, snapshots, doc.get("name"),
                     parse_int(doc["contract"]) if "contract" in doc else None)


def fixture_contract(path: str | Path) -> int | None:
    doc = json.loads(Path(path).read_text() or "{}")
    return parse_int(doc["contract"]) if "contract" in doc else None


@dataclass
class Replay:
    record: TransactionRecord
    result: ExecResult
    divergent: bool
    reason: str = ""
    internal_calls: list[InternalCall] = field(default_factory=list)


def replay(record: TransactionRecord, world: WorldState) -> Replay:
    """Re-execute ``record`` on a copy of ``world`` and compare with what was recorded."""
    res = execute_transaction(world.clone(), record.tx())
    reasons = []
    recorded_ok = record.status == "success"
    if res.success != recorded_ok:
        reasons.append(f"status {res.status} vs recorded {record.status}")
        if res.error:
            reasons.append(res.error)
    if recorded_ok and record.logs and [lg.to_json() for lg in res.logs] != [lg.to_json() for lg in record.logs]:
        reasons.append("logs differ")
    # reconstructed frames are authoritative over any recorded list
    frames = [c for c in res.calls if c.depth > 0]
    calls = [InternalCall(c.caller, c.callee, c.calldata, c.value) for c in frames]
    return Replay(record, res, bool(reasons), "; ".join(reasons), calls)


class HistoricalProvider(Protocol):
    """Source of historical transactions and state snapshots."""

    def transactions(self, contract: int, limit: int | None = None) -> list[TransactionRecord]: ...

    def snapshot(self, block: int) -> WorldState | None: ...


class FileProvider:
    """Provider backed by a fixture bundle on disk."""

    def __init__(self, path: str | Path | None = None, records: list[TransactionRecord] | None = None,
                 snapshots: dict[int, WorldState] | None = None):
        if path is not None:
            records, snapshots = load_fixture(path)
            self.contract = fixture_contract(path)
        else:
            self.contract = None
        self.records = records or []
        self.snapshots = snapshots or {}

    def transactions(self, contract: int, limit: int | None = None) -> list[TransactionRecord]:
        """Records that touch ``contract`` as the tx target or through a recorded internal call."""
        out = [
            r for r in self.records
            if r.to == contract or any(c.callee == contract for c in r.internal_calls or ())
            or any(lg.emitter == contract or contract in lg.topics for lg in r.logs)
        ]
        return out[:limit] if limit is not None else out

    def snapshot(self, block: int) -> WorldState | None:
        w = self.snapshots.get(block)
        return w.clone() if w is not None else None


def seed_calls(rep: Replay, contract: int) -> list[InternalCall]:
    """External calls into ``contract`` within a replayed transaction (top level included)."""
    rec = rep.record
    out = []
    if rec.to == contract:
        out.append(InternalCall(rec.sender, rec.to, rec.calldata, rec.value))
    out.extend(c for c in rep.internal_calls if c.callee == contract)
    return out
