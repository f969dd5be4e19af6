"""Path exploration over the instrumented program.

``concolic_run`` follows one seed transaction and symbolizes only the
calldata bytes that reach a CALL. ``symbolic_explore`` is the fallback used
when no seed leads anywhere: depth-first forking with pruning.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from ..bytecode import Executable
from ..cfg import build_cfg
from ..evm.state import WorldState
from ..taint import CalldataByte, CallSiteAnalysis
from ..words import hex_addr, parse_int
from .expr import Expr, Var, evaluate
from .machine import CallEvent, Env, Fork, Machine, PathConstraint, SymWord, cword
from .solver import SAT, UNSAT, SolveResult, solve

DEFAULT_ADVERSARY = 0xBADBADBADBADBADBADBADBADBADBADBADBADBAD0
DEFAULT_CALLDATA_LEN = 320
DEFAULT_TABLE_CAP = 2
DEFAULT_PATH_CAP = 4096
DEFAULT_TIME_BUDGET = 600.0

ORIGIN_VAR = Var("origin", 160)
CALLER_VAR = Var("caller", 160)
CALLVALUE_VAR = Var("callvalue")


@dataclass(frozen=True)
class OriginConfig:
    kind: str  # adversary | recorded
    address: int

    def to_json(self) -> dict[str, str]:
        return {"kind": self.kind, "address": hex_addr(self.address)}


def AdversaryAddress(address: int = DEFAULT_ADVERSARY) -> OriginConfig:
    return OriginConfig("adversary", address)


def RecordedOrigin(address: int) -> OriginConfig:
    return OriginConfig("recorded", address)


@dataclass
class SeedInput:
    caller: int
    origin: int
    calldata: bytes
    value: int = 0
    block_number: int = 0
    to: int = 0
    tx_hash: str = ""

    @property
    def world_ref(self) -> int:
        return self.block_number

    def to_json(self) -> dict[str, Any]:
        return {
            "caller": hex_addr(self.caller),
            "origin": hex_addr(self.origin),
            "calldata": "0x" + self.calldata.hex(),
            "value": hex(self.value),
            "blockNumber": self.block_number,
            "to": hex_addr(self.to),
            "hash": self.tx_hash,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> SeedInput:
        return cls(
            parse_int(d["caller"]),
            parse_int(d["origin"]),
            bytes.fromhex(d["calldata"].removeprefix("0x")),
            parse_int(d.get("value", 0)),
            int(d.get("blockNumber", 0)),
            parse_int(d.get("to", 0)),
            d.get("hash", ""),
        )


def cb_name(i: int) -> str:
    return f"cb{i}"


@dataclass
class PathState:
    """A path that reached a CALL, with enough context to solve for inputs."""

    call_pc: int
    analysis: CallSiteAnalysis
    exprs: dict[str, Expr]
    constraints: list[PathConstraint]
    symbolic: frozenset[int]
    calldata: bytes  # witness bytes for every position
    origin_config: OriginConfig
    mode: str  # concolic | symbolic
    block_number: int = 0
    value: int = 0
    table_visits: int = 0
    pinned: frozenset[int] | None = None  # None: every non-symbolic byte is pinned

    @property
    def calldata_len(self) -> int:
        return len(self.calldata)

    @property
    def sender(self) -> int:
        return self.origin_config.address

    def pins(self, origin: OriginConfig | None = None) -> dict[str, int]:
        o = origin or self.origin_config
        out = {"origin": o.address, "caller": o.address}
        if self.mode == "concolic":
            for i, b in enumerate(self.calldata):
                if i not in self.symbolic:
                    out[cb_name(i)] = b
        return out

    def hints(self) -> dict[str, int]:
        h = {cb_name(i): b for i, b in enumerate(self.calldata)}
        h["callvalue"] = 0
        return h

    def constraint_exprs(self) -> list[Expr]:
        return [c.expr for c in self.constraints]

    def solve(self, extra: list[Expr] = (), origin: OriginConfig | None = None,
              hints: dict[str, int] | None = None) -> SolveResult:
        h = self.hints()
        if hints:
            h.update(hints)
        return solve(self.constraint_exprs() + list(extra), self.pins(origin), h)

    def with_origin(self, origin: OriginConfig) -> PathState:
        return PathState(
            self.call_pc, self.analysis, self.exprs, self.constraints, self.symbolic, self.calldata,
            origin, self.mode, self.block_number, self.value, self.table_visits, self.pinned,
        )

    def feasible(self) -> bool:
        return self.solve().status == SAT

    def env_model(self, model: dict[str, int], origin: OriginConfig | None = None) -> dict[str, int]:
        return {**self.hints(), **self.pins(origin), **model}

    def calldata_from(self, model: dict[str, int]) -> bytes:
        return bytes(model.get(cb_name(i), b) & 0xFF for i, b in enumerate(self.calldata))

    def value_from(self, model: dict[str, int]) -> int:
        return model.get("callvalue", 0)

    def eval(self, e: Expr, env: dict[str, int]) -> int:
        return evaluate(e, env)

    def render_calldata(self) -> str:
        return "".join("SS" if i in self.symbolic else f"{b:02x}" for i, b in enumerate(self.calldata))

    def to_json(self) -> dict[str, Any]:
        return {
            "callPC": hex(self.call_pc),
            "mode": self.mode,
            "origin": self.origin_config.to_json(),
            "symbolicBytes": [hex(i) for i in sorted(self.symbolic)],
            "constraints": len(self.constraints),
            "tableVisits": self.table_visits,
        }


class ConcolicResult(list):
    """PathStates from one seed; ``reason`` explains an empty result."""

    def __init__(self, items=(), reason: str = "", status: str = "", machine: Machine | None = None):
        super().__init__(items)
        self.reason = reason
        self.status = status
        self.machine = machine


def _table_pc(program: Executable) -> int | None:
    table = getattr(program, "table", None)
    return table.base_pc if table is not None else None


def _symbolic_positions(ev: CallEvent, calldata_len: int) -> frozenset[int]:
    return frozenset(int(l) for l in ev.labels if isinstance(l, CalldataByte) and l < calldata_len)


def concolic_machine(program: Executable, seed: SeedInput, world: WorldState, *, address: int | None = None,
                     max_steps: int = 200_000) -> Machine:
    addr = seed.to if address is None else address
    env = Env(
        addr,
        SymWord(seed.caller, CALLER_VAR),
        SymWord(seed.origin, ORIGIN_VAR),
        SymWord(seed.value, CALLVALUE_VAR),
        seed.calldata,
        len(seed.calldata),
    )
    return Machine(program, env, world.clone(), True, _table_pc(program), max_steps)


def concolic_run(program: Executable, seed: SeedInput, world: WorldState, *, address: int | None = None,
                 origin_config: OriginConfig | None = None, max_steps: int = 200_000) -> ConcolicResult:
    """Execute ``seed`` with symbolic and taint shadows; one PathState per CALL reached."""
    m = concolic_machine(program, seed, world, address=address, max_steps=max_steps)
    acct = m.world.get(m.env.address)
    if acct is not None and seed.value:
        if m.world.balance(seed.origin) < seed.value:
            return ConcolicResult([], "seed sender cannot fund the value", "skipped", m)
    m.run()
    if m.status == "revert" or (m.status == "fault" and not m.reason.startswith("unsupported")):
        return ConcolicResult([], f"seed does not execute successfully: {m.status} {m.reason}".strip(), m.status, m)
    origin = origin_config or RecordedOrigin(seed.origin)
    out = []
    for ev in m.events:
        out.append(PathState(
            ev.analysis.call_pc, ev.analysis, ev.exprs, list(ev.constraints),
            _symbolic_positions(ev, len(seed.calldata)), seed.calldata, origin, "concolic",
            seed.block_number, seed.value, m.table_visits,
        ))
    reason = "" if out else "no CALL reached"
    if m.status == "fault":
        reason = f"partial: {m.reason}"
    return ConcolicResult(out, reason, m.status, m)


# --- fallback -------------------------------------------------------------------


@dataclass
class ExploreConfig:
    origin: OriginConfig = field(default_factory=AdversaryAddress)
    recorded_origin: int | None = None
    calldata_len: int = DEFAULT_CALLDATA_LEN
    table_visit_cap: int | None = DEFAULT_TABLE_CAP
    path_cap: int = DEFAULT_PATH_CAP
    time_budget: float = DEFAULT_TIME_BUDGET
    max_steps: int = 50_000
    block_number: int = 0
    keep_traces: bool = False
    stop_at_target: bool = True


class Exploration(list):
    """PathStates reaching the target plus exploration counters."""

    def __init__(self) -> None:
        super().__init__()
        self.paths_explored = 0
        self.pruned_unsat = 0
        self.pruned_cfg = 0
        self.pruned_table_cap = 0
        self.unknown = 0
        self.incomplete = False
        self.reason = ""
        self.origin: OriginConfig | None = None
        self.traces: list[tuple[str, tuple[int | None, ...]]] = []

    def sink_pcs(self) -> set[int]:
        return {p.call_pc for p in self}

    def to_json(self) -> dict[str, Any]:
        return {
            "paths_explored": self.paths_explored,
            "pruned_unsat": self.pruned_unsat,
            "pruned_cfg": self.pruned_cfg,
            "pruned_table_cap": self.pruned_table_cap,
            "incomplete": self.incomplete,
            "sinks": [p.to_json() for p in self],
        }


def _reaching_blocks(program: Executable, target_pc: int) -> tuple[list[int], set[int]]:
    cfg = build_cfg(program)
    pred: dict[int, list[int]] = {}
    for e in cfg.edges:
        pred.setdefault(e.dst, []).append(e.src)
    goal = {cfg.block_at_pc(target_pc).id} | set(cfg.unresolved)
    seen = set(goal)
    work = list(goal)
    while work:
        b = work.pop()
        for p in pred.get(b, ()):
            if p not in seen:
                seen.add(p)
                work.append(p)
    return cfg.block_index, seen


def symbolic_explore(program: Executable, world: WorldState, address: int, entry_pc: int = 0,
                     target_call_pc: int | None = None, config: ExploreConfig | None = None) -> Exploration:
    """Depth-first symbolic exploration from ``entry_pc``.

    The adversary configuration is tried first; if it reaches nothing and a
    recorded origin is configured, exploration is repeated with it.
    """
    config = config or ExploreConfig()
    res = _explore(program, world, address, entry_pc, target_call_pc, config, config.origin)
    if not res and config.recorded_origin is not None and config.origin.kind == "adversary":
        again = _explore(program, world, address, entry_pc, target_call_pc, config,
                         RecordedOrigin(config.recorded_origin))
        again.paths_explored += res.paths_explored
        return again
    return res


def _explore(program: Executable, world: WorldState, address: int, entry_pc: int, target: int | None,
             config: ExploreConfig, origin: OriginConfig) -> Exploration:
    out = Exploration()
    out.origin = origin
    block_index = reach = None
    if target is not None:
        block_index, reach = _reaching_blocks(program, target)
        start = program.targets.get(entry_pc, 0)
        if block_index[start] not in reach:
            out.reason = "the CFG shows that the path cannot reach the target CALL instruction"
            out.pruned_cfg += 1
            return out
    n = config.calldata_len
    env = Env(address, cword(origin.address), cword(origin.address), SymWord(None, CALLVALUE_VAR), None, n)
    root = Machine(program, env, world.clone(), False, _table_pc(program), config.max_steps)
    root.idx = program.targets.get(entry_pc, 0)
    cap = config.table_visit_cap

    def check(m: Machine) -> None:
        if cap is not None and m.table_visits > cap:
            m.halt("pruned", "table visit cap")

    def on_call(m: Machine, ev: CallEvent) -> None:
        if target is not None and ev.analysis.call_pc != target:
            return
        res = solve([c.expr for c in ev.constraints], {}, {"callvalue": 0})
        if res.status == SAT:
            witness = bytes(res.model.get(cb_name(i), 0) & 0xFF for i in range(n))
            out.append(PathState(
                ev.analysis.call_pc, ev.analysis, ev.exprs, list(ev.constraints),
                _symbolic_positions(ev, n), witness, origin, "symbolic",
                config.block_number, res.model.get("callvalue", 0), m.table_visits,
            ))
        elif res.status != UNSAT:
            out.unknown += 1
            out.incomplete = True
        if target is not None and config.stop_at_target:
            m.halt("reached", "target CALL")

    root.check = check
    root.on_call = on_call
    deadline = time.monotonic() + config.time_budget
    work = [root]
    while work:
        if out.paths_explored >= config.path_cap:
            out.incomplete, out.reason = True, "path cap reached"
            break
        if time.monotonic() > deadline:
            out.incomplete, out.reason = True, "time budget exhausted"
            break
        m = work.pop()
        try:
            m.run()
        except Fork as f:
            fresh = []
            for s in f.successors:
                if reach is not None and s.idx < len(block_index) and block_index[s.idx] not in reach:
                    out.pruned_cfg += 1
                    continue
                st = solve([c.expr for c in s.constraints]).status if s.constraints else SAT
                if st == UNSAT:
                    out.pruned_unsat += 1
                    continue
                fresh.append(s)
            work.extend(reversed(fresh))
            continue
        if m.status == "pruned":
            out.pruned_table_cap += 1
            continue
        if m.status == "incomplete":
            out.incomplete, out.reason = True, m.reason
        out.paths_explored += 1
        if config.keep_traces:
            out.traces.append((m.status, tuple(m.trace)))
    return out


__all__ = [
    "AdversaryAddress", "ConcolicResult", "DEFAULT_ADVERSARY", "ExploreConfig", "Exploration", "OriginConfig",
    "PathState", "RecordedOrigin", "SeedInput", "cb_name", "concolic_machine", "concolic_run", "symbolic_explore",
]
