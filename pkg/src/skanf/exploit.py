"""Exploit synthesis from a validated finding and end-to-end validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .bytecode import Executable
from .evm.interpreter import Tx, execute_transaction
from .evm.state import WorldState
from .oracle import Finding, RiskConfig
from .symbolic.engine import PathState, SeedInput, cb_name, concolic_run
from .symbolic.expr import Expr, const, evaluate, mk, negate, variables
from .symbolic.solver import SAT, solve
from .words import (
    ADDRESS_MASK,
    APPROVAL_TOPIC,
    APPROVE_SELECTOR,
    BALANCE_OF_SELECTOR,
    TRANSFER_FROM_SELECTOR,
    TRANSFER_SELECTOR,
    TRANSFER_TOPIC,
    hex_addr,
    parse_int,
)

MAX_ITERATIONS = 16
DRY_RUN_GAS = 3_000_000


@dataclass
class Expected:
    token: int
    recipient: int
    amount: int
    event: str  # Transfer | Approval

    def to_json(self) -> dict[str, Any]:
        return {
            "token": hex_addr(self.token),
            "recipient": hex_addr(self.recipient),
            "amount": hex(self.amount),
            "event": self.event,
        }


@dataclass
class Exploit:
    sender: int
    to: int
    gas: int
    gas_price: int
    value: int
    calldata: bytes
    block_number: int
    expected: Expected
    call_pc: int = 0
    # the path constraints the calldata was solved against, and the full assignment
    constraints: list[Expr] = field(default_factory=list, repr=False)
    model: dict[str, int] = field(default_factory=dict, repr=False)

    def tx(self) -> Tx:
        return Tx(self.sender, self.to, self.value, self.calldata, self.gas, self.gas_price)

    def to_json(self) -> dict[str, Any]:
        return {
            "from": hex_addr(self.sender),
            "to": hex_addr(self.to),
            "gas": self.gas,
            "gasPrice": self.gas_price,
            "value": hex(self.value),
            "calldataHex": "0x" + self.calldata.hex(),
            "blockNumber": self.block_number,
            "expected": self.expected.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Exploit:
        e = d["expected"]
        return cls(
            parse_int(d["from"]), parse_int(d["to"]), int(d["gas"]), int(d["gasPrice"]), parse_int(d["value"]),
            bytes.fromhex(d["calldataHex"][2:]), int(d["blockNumber"]),
            Expected(parse_int(e["token"]), parse_int(e["recipient"]), parse_int(e["amount"]), e["event"]),
        )


@dataclass
class ExploitVerdict:
    tx_success: bool
    event_found: bool
    stolen: dict[int, int] = field(default_factory=dict)
    available: bool = True
    error: str = ""
    balance_before: int | None = None
    balance_after: int | None = None

    @property
    def valid(self) -> bool:
        return self.available and self.tx_success and self.event_found

    def to_json(self) -> dict[str, Any]:
        return {
            "available": self.available,
            "valid": self.valid,
            "txSuccess": self.tx_success,
            "eventFound": self.event_found,
            "stolen": {hex_addr(k): hex(v) for k, v in sorted(self.stolen.items())},
            "error": self.error,
        }


@dataclass
class SynthesisFailure:
    call_pc: int
    token: int | None
    phase: str  # pre-call | post-call | replay | no-token
    reason: str

    def to_json(self) -> dict[str, Any]:
        return {
            "callPC": hex(self.call_pc),
            "token": hex_addr(self.token) if self.token is not None else None,
            "phase": self.phase,
            "reason": self.reason,
        }


def balance_of(world: WorldState, token: int, holder: int) -> int:
    """``token.balanceOf(holder)`` through the interpreter."""
    data = BALANCE_OF_SELECTOR.to_bytes(4, "big") + holder.to_bytes(32, "big")
    r = execute_transaction(world.clone(), Tx(0, token, 0, data), record_trace=False)
    if not r.success or len(r.return_data) < 32:
        return 0
    return int.from_bytes(r.return_data[:32], "big")


def held_tokens(world: WorldState, holder: int, cfg: RiskConfig) -> list[tuple[int, int]]:
    """(token, balance) pairs with a non-zero balance, by token address."""
    candidates = set(world.tokens()) | set(cfg.risky_tokens)
    out = []
    for t in sorted(candidates):
        if world.get(t) is None:
            continue
        b = balance_of(world, t, holder)
        if b:
            out.append((t, b))
    return out


def _eq(e: Expr | None, v: int) -> Expr | None:
    return None if e is None else mk("eq", e, const(v))


def _param_constraints(f: Finding, token: int, adversary: int, balance: int) -> tuple[list[Expr], Expected]:
    c = f.classes
    ex = f.path.exprs
    cons: list[Expr | None] = []
    if c["target"].controllable:
        cons.append(_eq(ex.get("target"), token))
    sel = c["selector"]
    selector = TRANSFER_SELECTOR if sel.controllable else sel.value
    if sel.controllable:
        cons.append(_eq(ex.get("selector"), TRANSFER_SELECTOR))
    if selector == TRANSFER_FROM_SELECTOR:
        # transferFrom(victim, adversary, amount)
        words = [("arg1", f.contract), ("arg2", adversary)]
        amount_role = "arg3"
    else:
        words = [("arg1", adversary)]
        amount_role = "arg2"
    for role, v in words:
        if c.get(role) is not None and c[role].controllable:
            cons.append(_eq(ex.get(role), v))
    amount_cls = c.get(amount_role)
    if amount_cls is not None and amount_cls.controllable:
        amount = balance
        cons.append(_eq(ex.get(amount_role), amount))
    else:
        amount = amount_cls.value if amount_cls is not None and amount_cls.value is not None else 0
    event = "Approval" if selector == APPROVE_SELECTOR else "Transfer"
    return [x for x in cons if x is not None], Expected(token, adversary, amount, event)


def _cb_indices(exprs: list[Expr]) -> set[int]:
    out: set[int] = set()
    for e in exprs:
        for name in variables(e):
            if name.startswith("cb"):
                out.add(int(name[2:]))
    return out


def _pins(path: PathState, free: set[int], sender: int) -> dict[str, int]:
    pins = {"origin": sender, "caller": sender}
    if path.mode == "concolic":
        for i, b in enumerate(path.calldata):
            if i not in free:
                pins[cb_name(i)] = b
    return pins


def synthesize(f: Finding, program: Executable, world: WorldState, adversary: int,
               cfg: RiskConfig) -> tuple[list[Exploit], list[SynthesisFailure]]:
    """One exploit per candidate token, or a failure record with the phase that failed."""
    exploits: list[Exploit] = []
    failures: list[SynthesisFailure] = []
    victim = f.contract
    target = f.classes["target"]
    if target.controllable:
        tokens = held_tokens(world, victim, cfg)
    else:
        tokens = [(target.value, balance_of(world, target.value, victim))]
    if not tokens:
        failures.append(SynthesisFailure(f.call_pc, None, "no-token", "victim holds no token balance"))
    for token, balance in tokens:
        r = _synthesize_one(f, program, world, adversary, token, balance)
        (exploits if isinstance(r, Exploit) else failures).append(r)
    return exploits, failures


def _synthesize_one(f: Finding, program: Executable, world: WorldState, adversary: int,
                    token: int, balance: int) -> Exploit | SynthesisFailure:
    path = f.path
    sender = f.origin.address
    params, expected = _param_constraints(f, token, adversary, balance)
    pre = path.constraint_exprs()
    extra: list[Expr] = []
    free = set(path.symbolic)
    hints = {**path.hints(), **{cb_name(i): b for i, b in enumerate(f.calldata)}}
    tried: set[tuple] = set()
    for it in range(MAX_ITERATIONS):
        cons = pre + params + extra
        free |= _cb_indices(extra)
        res = solve(cons, _pins(path, free, sender), hints)
        if res.status != SAT:
            phase = "pre-call" if not extra else "post-call"
            return SynthesisFailure(f.call_pc, token, phase, f"constraints {res.status}: {res.reason}")
        env = path.env_model(res.model)
        env.update(_pins(path, free, sender))
        calldata = path.calldata_from(env)
        value = env.get("callvalue", 0)
        seed = SeedInput(sender, sender, calldata, value, path.block_number, f.contract)
        run = concolic_run(program, seed, world, address=f.contract)
        m = run.machine
        ev = next((e for e in m.events if e.analysis.call_pc == f.call_pc), None) if m is not None else None
        if ev is None:
            return SynthesisFailure(f.call_pc, token, "replay", f"CALL not reached: {m.status if m else ''} {run.reason}")
        if m.status == "success":
            exp = Exploit(sender, f.contract, DRY_RUN_GAS, 0, value, calldata, path.block_number, expected,
                          f.call_pc, cons, env)
            dry = execute_transaction(world.clone(), exp.tx(), record_trace=False)
            exp.gas = max(2 * dry.gas_used, 21_000)
            return exp
        # generational step: flip the deepest post-CALL branch that is still satisfiable
        post = [c for c in m.constraints[len(ev.constraints):] if c.kind == "branch"]
        flipped = False
        for k in range(len(post) - 1, -1, -1):
            key = tuple(c.expr for c in post[:k]) + (("not", post[k].expr),)
            if key in tried:
                continue
            tried.add(key)
            candidate = [c.expr for c in post[:k]] + [negate(post[k].expr)]
            free_k = free | _cb_indices(candidate)
            if solve(pre + params + candidate, _pins(path, free_k, sender), hints).status == SAT:
                extra = candidate
                flipped = True
                break
        if not flipped:
            return SynthesisFailure(f.call_pc, token, "post-call",
                                    f"no satisfiable continuation to a stop instruction ({m.status} {m.reason})")
    return SynthesisFailure(f.call_pc, token, "post-call", "iteration budget exhausted")


def synthesis_sound(e: Exploit) -> bool:
    """Every recorded constraint holds under the exploit's assignment."""
    env = dict(e.model)
    for i, b in enumerate(e.calldata):
        env[cb_name(i)] = b
    return all(evaluate(c, env) != 0 for c in e.constraints)


def _matches(lg, e: Exploit) -> bool:
    exp = e.expected
    topic = APPROVAL_TOPIC if exp.event == "Approval" else TRANSFER_TOPIC
    if lg.emitter != exp.token or len(lg.topics) < 3 or lg.topics[0] != topic:
        return False
    return ((lg.topics[1] & ADDRESS_MASK) == e.to and (lg.topics[2] & ADDRESS_MASK) == exp.recipient
            and int.from_bytes(lg.data[:32].rjust(32, b"\x00"), "big") == exp.amount)


def validate_exploit(e: Exploit, world: WorldState | None) -> ExploitVerdict:
    """Run the exploit and look for the expected token event."""
    if world is None:
        return ExploitVerdict(False, False, available=False, error=f"no snapshot for block {e.block_number}")
    w = world.clone()
    before = balance_of(w, e.expected.token, e.to)
    r = execute_transaction(w, e.tx(), record_trace=False)
    found = [lg for lg in r.logs if _matches(lg, e)] if r.success else []
    stolen: dict[int, int] = {}
    for lg in found:
        stolen[lg.emitter] = stolen.get(lg.emitter, 0) + int.from_bytes(lg.data[:32], "big")
    after = balance_of(w, e.expected.token, e.to)
    return ExploitVerdict(r.success, bool(found), stolen, True, r.error, before, after)


__all__ = [
    "Exploit", "ExploitVerdict", "Expected", "SynthesisFailure", "balance_of", "held_tokens", "synthesis_sound",
    "synthesize", "validate_exploit",
]
