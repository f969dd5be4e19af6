"""Vulnerability oracle: parameter classes, the asset-management criterion,
preliminary validation and the report format."""

from __future__ import annotations

import json
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .evm.interpreter import Tx, execute_transaction, reached_pc
from .evm.state import WorldState
from .symbolic.engine import AdversaryAddress, OriginConfig, PathState, RecordedOrigin
from .symbolic.solver import SAT
from .taint import CallSiteAnalysis
from .words import (
    APPROVE_SELECTOR,
    BALANCE_OF_SELECTOR,
    TRANSFER_FROM_SELECTOR,
    TRANSFER_SELECTOR,
    hex_addr,
    parse_int,
)

CONTROLLABLE = "Controllable"
FIXED_RISKY = "FixedRisky"
FIXED_SAFE = "FixedSafe"
FIXED = "Fixed"  # argument words are only controllable or not

RISKY_SELECTORS = frozenset({TRANSFER_SELECTOR, APPROVE_SELECTOR, TRANSFER_FROM_SELECTOR})

REPORT_FIELDS = (
    "caller", "origin", "blockNumber", "callPC", "calldata",
    "targetAddress", "functionSelector", "destination", "amount",
)

_ADDR = {"type": "string", "pattern": "^0x[0-9a-fA-F.]+$"}
_STAR_OR = lambda pat: {"anyOf": [{"const": "*"}, {"type": "string", "pattern": pat}]}

REPORT_SCHEMA = {
    "type": "object",
    "required": list(REPORT_FIELDS),
    "additionalProperties": False,
    "properties": {
        "caller": _ADDR,
        "origin": _ADDR,
        "blockNumber": {"type": "integer", "minimum": 0},
        "callPC": {"type": "string", "pattern": "^0x[0-9a-f]+$"},
        "calldata": {"type": "string", "pattern": "^([0-9a-fA-F]{2}|SS)*[0-9a-fA-F]*(\\.\\.\\.)?$"},
        "targetAddress": _STAR_OR("^0x[0-9a-fA-F]{1,40}$"),
        "functionSelector": _STAR_OR("^0x[0-9a-f]{8}$"),
        "destination": _STAR_OR("^0x[0-9a-fA-F]{1,64}$"),
        "amount": _STAR_OR("^0x[0-9a-fA-F]{1,64}$"),
    },
}

# the documented example, with its annotations removed
EXAMPLE_REPORT = """{
  "caller": "0xdead...beef",
  "origin": "0xdead...beef",
  "blockNumber": 20000000,
  "callPC": "0xac5",
  "calldata": "12345678SS...",
  "targetAddress": "*",
  "functionSelector": "0xa9059cbb",
  "destination": "*",
  "amount": "*"
}"""


@dataclass(frozen=True)
class ParamClass:
    kind: str
    value: int | None = None  # concrete value when fixed

    @property
    def controllable(self) -> bool:
        return self.kind == CONTROLLABLE

    @property
    def risky(self) -> bool:
        return self.kind in (CONTROLLABLE, FIXED_RISKY)

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {"class": self.kind}
        if self.value is not None:
            d["value"] = hex(self.value)
        return d


@dataclass
class RiskConfig:
    risky_tokens: frozenset[int] = frozenset()
    risky_selectors: frozenset[int] = RISKY_SELECTORS

    def __post_init__(self) -> None:
        self.risky_tokens = frozenset(self.risky_tokens)
        self.risky_selectors = frozenset(self.risky_selectors) | RISKY_SELECTORS

    @classmethod
    def from_file(cls, path: str | Path) -> RiskConfig:
        """JSON list of token addresses, or ``{"tokens": [...], "selectors": [...]}``."""
        doc = json.loads(Path(path).read_text())
        if isinstance(doc, list):
            return cls(frozenset(parse_int(a) for a in doc))
        return cls(
            frozenset(parse_int(a) for a in doc.get("tokens", [])),
            frozenset(parse_int(s) for s in doc.get("selectors", [])),
        )


def _looks_like_token(code: bytes) -> bool:
    # PUSH4 transfer and PUSH4 balanceOf both present in the dispatcher
    return (b"\x63" + TRANSFER_SELECTOR.to_bytes(4, "big") in code
            and b"\x63" + BALANCE_OF_SELECTOR.to_bytes(4, "big") in code)


def is_token(world: WorldState | None, addr: int, cfg: RiskConfig) -> bool:
    if addr in cfg.risky_tokens:
        return True
    if world is None:
        return False
    acct = world.get(addr)
    return acct is not None and (acct.token is not None or _looks_like_token(acct.code))


def classify(analysis: CallSiteAnalysis, cfg: RiskConfig, world: WorldState | None = None) -> dict[str, ParamClass]:
    """Class of the target, the selector and every argument word."""
    out: dict[str, ParamClass] = {}
    t = analysis.target
    if t.controllable:
        out["target"] = ParamClass(CONTROLLABLE)
    else:
        out["target"] = ParamClass(FIXED_RISKY if is_token(world, t.value, cfg) else FIXED_SAFE, t.value)
    sel = analysis.selector
    if sel is None:
        out["selector"] = ParamClass(FIXED_SAFE)
    elif sel.controllable:
        out["selector"] = ParamClass(CONTROLLABLE)
    else:
        out["selector"] = ParamClass(FIXED_RISKY if sel.value in cfg.risky_selectors else FIXED_SAFE, sel.value)
    for p in analysis.args:
        out[p.role] = ParamClass(CONTROLLABLE) if p.controllable else ParamClass(FIXED, p.value)
    return out


@dataclass(frozen=True)
class Vulnerability:
    kind: str
    amount_controllable: bool


def is_vulnerable(classes: dict[str, ParamClass]) -> Vulnerability | None:
    """Target and selector controllable or risky, and the recipient word (call bytes 5-36) controllable."""
    target, sel = classes["target"], classes["selector"]
    arg1 = classes.get("arg1")
    if not (target.risky and sel.risky and arg1 is not None and arg1.controllable):
        return None
    arg2 = classes.get("arg2")
    kind = "approve" if sel.kind == FIXED_RISKY and sel.value == APPROVE_SELECTOR else "transfer"
    return Vulnerability(kind, arg2 is not None and arg2.controllable)


# --- reports ---------------------------------------------------------------------


@dataclass
class VulnerabilityReport:
    caller: str
    origin: str
    blockNumber: int
    callPC: str
    calldata: str
    targetAddress: str
    functionSelector: str
    destination: str
    amount: str

    def to_json(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in REPORT_FIELDS}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> VulnerabilityReport:
        validate_report(d)
        return cls(**{k: d[k] for k in REPORT_FIELDS})

    @classmethod
    def loads(cls, text: str) -> VulnerabilityReport:
        return cls.from_json(json.loads(text))

    @property
    def call_pc(self) -> int:
        return int(self.callPC, 16)

    @property
    def block_number(self) -> int:
        return self.blockNumber


def validate_report(d: Any) -> None:
    jsonschema.validate(d, REPORT_SCHEMA)


def _star(c: ParamClass | None, fmt) -> str:
    if c is None:
        return hex(0)
    return "*" if c.controllable else fmt(c.value or 0)


@dataclass
class Finding:
    """A vulnerable CALL site with everything needed downstream."""

    contract: int
    path: PathState
    classes: dict[str, ParamClass]
    vulnerability: Vulnerability
    origin: OriginConfig
    model: dict[str, int]
    calldata: bytes
    value: int = 0
    validated: bool | None = None  # None: snapshot missing
    notes: list[str] = field(default_factory=list)

    @property
    def call_pc(self) -> int:
        return self.path.call_pc

    @property
    def sender(self) -> int:
        return self.origin.address

    def report(self) -> VulnerabilityReport:
        return emit_report(self)

    def meta(self) -> dict[str, Any]:
        return {
            "callPC": hex(self.call_pc),
            "kind": self.vulnerability.kind,
            "amountControllable": self.vulnerability.amount_controllable,
            "mode": self.path.mode,
            "origin": self.origin.to_json(),
            "validated": self.validated,
            "classes": {k: v.to_json() for k, v in sorted(self.classes.items())},
            "calldataHex": "0x" + self.calldata.hex(),
            "notes": list(self.notes),
        }


def emit_report(f: Finding) -> VulnerabilityReport:
    c = f.classes
    addr = f.origin.address
    return VulnerabilityReport(
        caller=hex_addr(addr),
        origin=hex_addr(addr),
        blockNumber=f.path.block_number,
        callPC=hex(f.call_pc),
        calldata=f.path.render_calldata(),
        targetAddress=_star(c["target"], hex_addr),
        functionSelector=_star(c["selector"], lambda v: f"0x{v:08x}"),
        destination=_star(c.get("arg1"), lambda v: hex_addr(v) if v >> 160 == 0 else hex(v)),
        amount=_star(c.get("arg2"), hex),
    )


def preliminary_validate(report: VulnerabilityReport, world: WorldState, *, contract: int, calldata: bytes,
                         value: int = 0, sender: int | None = None) -> bool:
    """Replay the report's transaction and check that its CALL executes.

    Success of the transaction is not required.
    """
    frm = parse_int(report.origin) if sender is None else sender
    res = execute_transaction(world.clone(), Tx(frm, contract, value, calldata))
    return reached_pc(res, report.call_pc, contract)


def _origin_candidates(path: PathState, adversary: int) -> list[OriginConfig]:
    out = [AdversaryAddress(adversary)]
    if path.origin_config.kind == "recorded":
        out.append(path.origin_config)
    return out


def analyze_path(path: PathState, contract: int, cfg: RiskConfig, world: WorldState | None,
                 adversary: int, recorded_origin: int | None = None) -> Finding | None:
    """Oracle plus preliminary validation for one PathState; None if not vulnerable."""
    classes = classify(path.analysis, cfg, world)
    vuln = is_vulnerable(classes)
    if vuln is None:
        return None
    origins = _origin_candidates(path, adversary)
    if recorded_origin is not None and all(o.address != recorded_origin for o in origins):
        origins.append(RecordedOrigin(recorded_origin))
    if path.mode == "symbolic":
        origins = [path.origin_config]
    for origin in origins:
        res = path.solve(origin=origin)
        if res.status != SAT:
            continue
        env = path.env_model(res.model, origin)
        calldata = path.calldata_from(env)
        value = path.value_from(env)
        f = Finding(contract, path.with_origin(origin), classes, vuln, origin, env, calldata, value)
        if world is None:
            f.notes.append("no snapshot: validation skipped")
        else:
            f.validated = preliminary_validate(f.report(), world, contract=contract, calldata=calldata,
                                               value=value, sender=origin.address)
        return f
    return None


def dedupe(findings: Iterable[Finding]) -> list[Finding]:
    """One finding per CALL pc, preferring validated ones, then adversary origins."""
    best: dict[int, Finding] = {}
    for f in findings:
        cur = best.get(f.call_pc)
        key = (f.validated is True, f.origin.kind == "adversary")
        if cur is None or key > (cur.validated is True, cur.origin.kind == "adversary"):
            best[f.call_pc] = f
    return [best[pc] for pc in sorted(best)]


__all__ = [
    "CONTROLLABLE", "EXAMPLE_REPORT", "FIXED", "FIXED_RISKY", "FIXED_SAFE", "Finding", "ParamClass",
    "REPORT_FIELDS", "REPORT_SCHEMA", "RISKY_SELECTORS", "RiskConfig", "VulnerabilityReport",
    "Vulnerability", "analyze_path", "classify", "dedupe", "emit_report", "is_token", "is_vulnerable",
    "preliminary_validate", "validate_report",
]
