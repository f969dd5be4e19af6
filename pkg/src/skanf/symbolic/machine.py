"""Shadow execution of one path over words carrying a concrete value, an
expression and a taint.

The same machine runs in two modes:

* concolic - every word has a concrete value; symbolic branch conditions
  are recorded but the concrete outcome decides the path;
* symbolic - words may lack a concrete value; symbolic branches and jumps
  produce forks that the caller schedules.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from ..bytecode import Executable, Instruction
from ..evm.interpreter import UNSUPPORTED, _Context, message_call
from ..evm.state import WorldState
from ..taint import (
    CALLER as L_CALLER,
)
from ..taint import (
    CALLVALUE as L_CALLVALUE,
)
from ..taint import (
    EMPTY,
    CallSiteAnalysis,
    Taint,
    TaintedMemory,
    TaintedStorage,
    add_address_taint,
    calldatacopy_taints,
    calldataload_taint,
    join,
    propagate,
    sink_decompose,
    uniform,
)
from ..taint import (
    ORIGIN as L_ORIGIN,
)
from ..words import ADDRESS_MASK, BINARY, TERNARY, UNARY, keccak_int
from .expr import (
    ZERO,
    Const,
    Expr,
    Var,
    byte_parts,
    byte_var,
    concat,
    const,
    mk,
    negate,
    truth,
)

MAX_STACK = 1024
GAS_START = 3_000_000


class SymWord:
    __slots__ = ("c", "e", "t")

    def __init__(self, c: int | None, e: Expr, t: Taint = EMPTY):
        self.c = c
        self.e = e
        self.t = t

    def __repr__(self) -> str:
        return f"SymWord({self.c if self.c is None else hex(self.c)}, {self.e}, {self.t})"

    @property
    def symbolic(self) -> bool:
        return not isinstance(self.e, Const)


def cword(v: int) -> SymWord:
    return SymWord(v, const(v))


class PathConstraint(NamedTuple):
    expr: Expr  # must evaluate to nonzero
    pc: int | None
    kind: str  # branch | jump | concretize | env
    after_call: bool = False


@dataclass
class CallEvent:
    """What the machine saw at one CALL."""

    analysis: CallSiteAnalysis
    exprs: dict[str, Expr]
    constraints: tuple[PathConstraint, ...]
    step: int
    # every label reaching the raw stack operands or the input bytes
    labels: frozenset = frozenset()


class Halted(Exception):
    pass


class Fork(Exception):
    def __init__(self, successors: list[Any]):
        self.successors = successors


@dataclass
class Env:
    address: int
    caller: SymWord
    origin: SymWord
    callvalue: SymWord
    calldata: bytes | None  # concrete bytes (concolic) or None
    calldata_len: int
    gas_price: int = 0


@dataclass
class Machine:
    program: Executable
    env: Env
    world: WorldState
    concolic: bool = True
    table_pc: int | None = None
    max_steps: int = 200_000
    on_call: Callable[[Machine, CallEvent], None] | None = None
    stack: list[SymWord] = field(default_factory=list)
    mem_c: bytearray = field(default_factory=bytearray)
    mem_e: dict[int, Expr] = field(default_factory=dict)
    mem_t: TaintedMemory = field(default_factory=TaintedMemory)
    storage: dict[int, SymWord] = field(default_factory=dict)
    store_t: TaintedStorage = field(default_factory=TaintedStorage)
    constraints: list[PathConstraint] = field(default_factory=list)
    idx: int = 0
    sequential: bool = True
    steps: int = 0
    table_visits: int = 0
    gas: int = GAS_START
    returndata: bytes = b""
    returndata_t: frozenset = frozenset()
    status: str = "running"
    reason: str = ""
    return_data: bytes = b""
    calls_made: int = 0
    fresh: int = 0
    trace: list[int | None] = field(default_factory=list)
    events: list[CallEvent] = field(default_factory=list)
    check: Callable[[Machine], None] | None = None

    # --- state management -------------------------------------------------

    def clone(self) -> Machine:
        m = Machine(
            self.program, self.env, self.world.clone(), self.concolic, self.table_pc, self.max_steps, self.on_call
        )
        m.stack = list(self.stack)
        m.mem_c = bytearray(self.mem_c)
        m.mem_e = dict(self.mem_e)
        m.mem_t = self.mem_t.copy()
        m.storage = dict(self.storage)
        m.store_t = self.store_t.copy()
        m.constraints = list(self.constraints)
        m.idx, m.sequential, m.steps = self.idx, self.sequential, self.steps
        m.table_visits, m.gas = self.table_visits, self.gas
        m.returndata, m.returndata_t = self.returndata, self.returndata_t
        m.calls_made, m.fresh = self.calls_made, self.fresh
        m.trace = list(self.trace)
        m.events = list(self.events)
        m.check = self.check
        return m

    @property
    def pc(self) -> int | None:
        if self.idx < len(self.program.instructions):
            return self.program.instructions[self.idx].pc
        return None

    @property
    def halted(self) -> bool:
        return self.status != "running"

    def halt(self, status: str, reason: str = "", data: bytes = b"") -> None:
        self.status = status
        self.reason = reason
        self.return_data = data
        raise Halted()

    def add_constraint(self, e: Expr, pc: int | None, kind: str) -> None:
        if isinstance(e, Const):
            if e.value == 0:
                self.halt("infeasible", f"constraint folds to false at {pc}")
            return
        self.constraints.append(PathConstraint(e, pc, kind, self.calls_made > 0))

    def fresh_var(self, prefix: str, bits: int = 256) -> Var:
        self.fresh += 1
        return Var(f"{prefix}{self.fresh}", bits)

    # --- stack ------------------------------------------------------------

    def pop(self) -> SymWord:
        if not self.stack:
            self.halt("fault", "stack underflow")
        return self.stack.pop()

    def push(self, w: SymWord) -> None:
        if len(self.stack) >= MAX_STACK:
            self.halt("fault", "stack overflow")
        self.stack.append(w)

    # --- concretization ---------------------------------------------------------

    def concrete(self, w: SymWord, pc: int | None, what: str) -> int:
        """A concrete value for ``w``, pinning the path to it if it was symbolic."""
        if isinstance(w.e, Const):
            return w.e.value
        if w.c is None:
            from .solver import SAT, solve

            res = solve([c.expr for c in self.constraints])
            if res.status != SAT:
                self.halt("incomplete", f"cannot concretize {what}")
            from .expr import evaluate

            w = SymWord(evaluate(w.e, res.model), w.e, w.t)
        self.add_constraint(mk("eq", w.e, const(w.c)), pc, "concretize")
        return w.c

    # --- memory ---------------------------------------------------------------------

    def _extend(self, off: int, size: int) -> None:
        if size == 0:
            return
        end = off + size
        if end > 1 << 24:
            self.halt("fault", "memory offset out of range")
        if end > len(self.mem_c):
            new = (end + 31) // 32 * 32
            self.mem_c.extend(b"\x00" * (new - len(self.mem_c)))

    def mem_parts(self, off: int, size: int) -> list[Expr]:
        self._extend(off, size)
        get = self.mem_e.get
        mc = self.mem_c
        return [get(off + i) or const(mc[off + i]) for i in range(size)]

    def mem_concrete(self, off: int, size: int) -> bytes | None:
        self._extend(off, size)
        if not self.concolic and any((off + i) in self.mem_e for i in range(size)):
            return None
        return bytes(self.mem_c[off:off + size])

    def mem_write_parts(self, off: int, parts: list[Expr], concrete: bytes | None) -> None:
        self._extend(off, len(parts))
        for i, p in enumerate(parts):
            o = off + i
            if isinstance(p, Const):
                self.mem_e.pop(o, None)
                self.mem_c[o] = p.value
            else:
                self.mem_e[o] = p
                self.mem_c[o] = concrete[i] if concrete is not None else 0

    # --- execution --------------------------------------------------------------

    def run(self) -> None:
        """Run until halt; a Fork propagates to the caller."""
        try:
            while True:
                self.step()
        except Halted:
            return

    def step(self) -> None:
        prog = self.program
        idx = self.idx
        instrs = prog.instructions
        if (idx == prog.code_end and self.sequential) or idx >= len(instrs):
            self.halt("success", "end of code")
        self.steps += 1
        if self.steps > self.max_steps:
            self.halt("incomplete", "step budget exhausted")
        ins = instrs[idx]
        self.trace.append(ins.pc)
        self.sequential = True
        self.idx = idx + 1
        self.gas -= 3
        op = ins.opcode
        if op.immediate_len or op.mnemonic == "PUSH0":
            self.push(cword(ins.arg))
        else:
            name = op.mnemonic
            h = _HANDLERS.get(name)
            if h is not None:
                h(self, ins)
            elif name in BINARY or name in UNARY or name in TERNARY:
                self._arith(name, op.stack_pops)
            elif name in UNSUPPORTED:
                self.halt("fault", f"unsupported: {name}")
            else:
                self.halt("fault", f"invalid opcode {op.value:#04x}")
        if self.check is not None:
            self.check(self)

    def _arith(self, name: str, n: int) -> None:
        args = [self.pop() for _ in range(n)]
        cs = [a.c for a in args]
        if all(c is not None for c in cs):
            fn = BINARY.get(name) or UNARY.get(name) or TERNARY[name]
            c = fn(*cs)
        else:
            c = None
        e = mk(name.lower(), *(a.e for a in args))
        if isinstance(e, Const):
            c = e.value
        t = propagate(name, [a.t for a in args], _mask_operands(args, cs))
        self.push(SymWord(c, e, t))

    def jump_to(self, dest: int) -> None:
        idx = self.program.targets.get(dest)
        if idx is None or self.program.instructions[idx].opcode.mnemonic != "JUMPDEST":
            self.halt("fault", f"invalid jump destination {dest:#x}")
        if dest == self.table_pc:
            self.table_visits += 1
        self.idx = idx
        self.sequential = False


def _mask_operands(args: list[SymWord], cs: list[int | None]) -> list[int] | None:
    # the AND-mask rule only reads the untainted operand, which must be concrete
    if all(c is not None for c in cs):
        return cs  # type: ignore[return-value]
    if any(c is None and not a.t.all for a, c in zip(args, cs)):
        return None
    return [c if c is not None else 0 for c in cs]


# --- handlers ---------------------------------------------------------------

def _h_stop(m: Machine, ins: Instruction) -> None:
    m.halt("success", "STOP")


def _h_invalid(m: Machine, ins: Instruction) -> None:
    m.halt("fault", "INVALID")


def _h_return(m: Machine, ins: Instruction) -> None:
    off = m.concrete(m.pop(), ins.pc, "return offset")
    size = m.concrete(m.pop(), ins.pc, "return size")
    data = m.mem_concrete(off, size) or b""
    m.halt("success", "RETURN", data)


def _h_revert(m: Machine, ins: Instruction) -> None:
    off = m.concrete(m.pop(), ins.pc, "revert offset")
    size = m.concrete(m.pop(), ins.pc, "revert size")
    m.halt("revert", "REVERT", m.mem_concrete(off, size) or b"")


def _h_selfdestruct(m: Machine, ins: Instruction) -> None:
    m.pop()
    m.halt("success", "SELFDESTRUCT")


def _h_pop(m: Machine, ins: Instruction) -> None:
    m.pop()


def _h_jumpdest(m: Machine, ins: Instruction) -> None:
    pass


def _dup(n: int):
    def h(m: Machine, ins: Instruction) -> None:
        if len(m.stack) < n:
            m.halt("fault", "stack underflow")
        m.push(m.stack[-n])

    return h


def _swap(n: int):
    def h(m: Machine, ins: Instruction) -> None:
        st = m.stack
        if len(st) <= n:
            m.halt("fault", "stack underflow")
        st[-1], st[-1 - n] = st[-1 - n], st[-1]

    return h


def _h_jump(m: Machine, ins: Instruction) -> None:
    d = m.pop()
    if isinstance(d.e, Const):
        m.jump_to(d.e.value)
        return
    if m.concolic:
        m.add_constraint(mk("eq", d.e, const(d.c)), ins.pc, "jump")
        m.jump_to(d.c)
        return
    # symbolic destination: one successor per legal jump destination
    succ = []
    for dest in sorted(m.program.targets):
        if m.program.instructions[m.program.targets[dest]].opcode.mnemonic != "JUMPDEST":
            continue
        cond = mk("eq", d.e, const(dest))
        if cond == ZERO:
            continue
        s = m.clone()
        try:
            s.add_constraint(cond, ins.pc, "jump")
            s.jump_to(dest)
        except Halted:
            continue
        succ.append(s)
    raise Fork(succ)


def _h_jumpi(m: Machine, ins: Instruction) -> None:
    d = m.pop()
    cond = m.pop()
    if not isinstance(d.e, Const):
        dest = m.concrete(d, ins.pc, "jumpi destination")
    else:
        dest = d.e.value
    if isinstance(cond.e, Const):
        if cond.e.value:
            m.jump_to(dest)
        return
    if m.concolic:
        if cond.c:
            m.add_constraint(truth(cond.e), ins.pc, "branch")
            m.jump_to(dest)
        else:
            m.add_constraint(negate(cond.e), ins.pc, "branch")
        return
    taken = m.clone()
    fall = m
    succ = []
    try:
        taken.add_constraint(truth(cond.e), ins.pc, "branch")
        taken.jump_to(dest)
        succ.append(taken)
    except Halted:
        pass
    try:
        fall_c = m.clone()
        fall_c.add_constraint(negate(cond.e), ins.pc, "branch")
        succ.append(fall_c)
    except Halted:
        pass
    del fall
    raise Fork(succ)


def _h_pc(m: Machine, ins: Instruction) -> None:
    m.push(cword(ins.pc if ins.pc is not None else 0))


def _h_gas(m: Machine, ins: Instruction) -> None:
    m.push(cword(max(m.gas, 0)))


def _h_msize(m: Machine, ins: Instruction) -> None:
    m.push(cword(len(m.mem_c)))


def _h_address(m: Machine, ins: Instruction) -> None:
    m.push(cword(m.env.address))


def _h_caller(m: Machine, ins: Instruction) -> None:
    w = m.env.caller
    m.push(SymWord(w.c, w.e, uniform({L_CALLER})))


def _h_origin(m: Machine, ins: Instruction) -> None:
    w = m.env.origin
    m.push(SymWord(w.c, w.e, uniform({L_ORIGIN})))


def _h_callvalue(m: Machine, ins: Instruction) -> None:
    w = m.env.callvalue
    m.push(SymWord(w.c, w.e, uniform({L_CALLVALUE})))


def _h_calldatasize(m: Machine, ins: Instruction) -> None:
    m.push(cword(m.env.calldata_len))


def _cd_part(m: Machine, i: int) -> Expr:
    return byte_var(i) if i < m.env.calldata_len else ZERO


def _h_calldataload(m: Machine, ins: Instruction) -> None:
    o = m.pop()
    off = m.concrete(o, ins.pc, "calldata offset")
    parts = [_cd_part(m, off + i) for i in range(32)]
    e = concat(parts)
    c = None
    if m.env.calldata is not None:
        c = int.from_bytes(m.env.calldata[off:off + 32].ljust(32, b"\x00"), "big") if off < len(m.env.calldata) else 0
    elif isinstance(e, Const):
        c = e.value
    m.push(SymWord(c, e, calldataload_taint(off, o.t, m.env.calldata_len)))


def _h_calldatacopy(m: Machine, ins: Instruction) -> None:
    mo, so, sz = m.pop(), m.pop(), m.pop()
    moff = m.concrete(mo, ins.pc, "memory offset")
    src = m.concrete(so, ins.pc, "calldata offset")
    size = m.concrete(sz, ins.pc, "copy size")
    if size == 0:
        return
    parts = [_cd_part(m, src + i) for i in range(size)]
    cd = m.env.calldata
    conc = (cd[src:src + size].ljust(size, b"\x00") if src < len(cd) else b"\x00" * size) if cd is not None else None
    m.mem_write_parts(moff, parts, conc)
    addr_t = join(mo.t, so.t, sz.t)
    m.mem_t.write(moff, calldatacopy_taints(src, size, m.env.calldata_len, addr_t))


def _h_codesize(m: Machine, ins: Instruction) -> None:
    m.push(cword(len(m.program.code)))


def _copy_concrete(m: Machine, ins: Instruction, source: bytes, taint: frozenset) -> None:
    moff = m.concrete(m.pop(), ins.pc, "memory offset")
    src = m.concrete(m.pop(), ins.pc, "source offset")
    size = m.concrete(m.pop(), ins.pc, "copy size")
    if size == 0:
        return
    data = source[src:src + size].ljust(size, b"\x00") if src < len(source) else b"\x00" * size
    m.mem_write_parts(moff, [const(b) for b in data], data)
    m.mem_t.write(moff, [taint] * size)


def _h_codecopy(m: Machine, ins: Instruction) -> None:
    _copy_concrete(m, ins, m.program.code, frozenset())


def _h_returndatasize(m: Machine, ins: Instruction) -> None:
    m.push(SymWord(len(m.returndata), const(len(m.returndata)), uniform(m.returndata_t)))


def _h_returndatacopy(m: Machine, ins: Instruction) -> None:
    _copy_concrete(m, ins, m.returndata, m.returndata_t)


def _h_mload(m: Machine, ins: Instruction) -> None:
    o = m.pop()
    off = m.concrete(o, ins.pc, "memory offset")
    e = concat(m.mem_parts(off, 32))
    raw = m.mem_concrete(off, 32)
    c = int.from_bytes(raw, "big") if raw is not None else (e.value if isinstance(e, Const) else None)
    m.push(SymWord(c, e, m.mem_t.load_word(off, o.t)))


def _h_mstore(m: Machine, ins: Instruction) -> None:
    o, v = m.pop(), m.pop()
    off = m.concrete(o, ins.pc, "memory offset")
    m.mem_write_parts(off, byte_parts(v.e), v.c.to_bytes(32, "big") if v.c is not None else None)
    m.mem_t.store_word(off, v.t, o.t)


def _h_mstore8(m: Machine, ins: Instruction) -> None:
    o, v = m.pop(), m.pop()
    off = m.concrete(o, ins.pc, "memory offset")
    part = byte_parts(v.e)[31]
    m.mem_write_parts(off, [part], bytes([v.c & 0xFF]) if v.c is not None else None)
    m.mem_t.write(off, [add_address_taint(v.t, o.t).byte(31)])


def _h_sha3(m: Machine, ins: Instruction) -> None:
    o, s = m.pop(), m.pop()
    off = m.concrete(o, ins.pc, "sha3 offset")
    size = m.concrete(s, ins.pc, "sha3 size")
    parts = m.mem_parts(off, size)
    e = mk("sha3", *parts) if parts else const(keccak_int(b""))
    raw = m.mem_concrete(off, size)
    c = keccak_int(raw) if raw is not None else (e.value if isinstance(e, Const) else None)
    t = uniform(m.mem_t.range_union(off, size) | o.t.all | s.t.all)
    m.push(SymWord(c, e, t))


def _h_sload(m: Machine, ins: Instruction) -> None:
    s = m.pop()
    slot = m.concrete(s, ins.pc, "storage slot")
    w = m.storage.get(slot)
    if w is None:
        if m.concolic:
            w = cword(m.world.storage_at(m.env.address, slot))
        else:
            w = SymWord(None, Var(f"sload_{slot:x}"))
        m.storage[slot] = w
    t = m.store_t.load(m.env.address, slot, s.t)
    m.push(SymWord(w.c, w.e, t))


def _h_sstore(m: Machine, ins: Instruction) -> None:
    s, v = m.pop(), m.pop()
    slot = m.concrete(s, ins.pc, "storage slot")
    m.storage[slot] = SymWord(v.c, v.e)
    m.store_t.store(m.env.address, slot, v.t, s.t)


def _world_word(fn: Callable[[Machine], int]):
    def h(m: Machine, ins: Instruction) -> None:
        m.push(cword(fn(m)))

    return h


def _addr_query(fn: Callable[[Machine, int], int], prefix: str):
    def h(m: Machine, ins: Instruction) -> None:
        a = m.pop()
        if a.c is None and not isinstance(a.e, Const):
            m.push(SymWord(None, m.fresh_var(prefix), a.t))
            return
        addr = (a.e.value if isinstance(a.e, Const) else a.c) & ADDRESS_MASK
        v = fn(m, addr)
        m.push(SymWord(v, const(v), a.t))

    return h


def _extcodesize(m: Machine, addr: int) -> int:
    acct = m.world.get(addr)
    if acct is None:
        return 0
    return 1 if acct.token is not None else len(acct.code)


def _extcodehash(m: Machine, addr: int) -> int:
    acct = m.world.get(addr)
    return 0 if acct is None else keccak_int(acct.code)


def _h_blockhash(m: Machine, ins: Instruction) -> None:
    m.pop()
    m.push(cword(0))


def _log(n: int):
    def h(m: Machine, ins: Instruction) -> None:
        m.concrete(m.pop(), ins.pc, "log offset")
        m.concrete(m.pop(), ins.pc, "log size")
        for _ in range(n):
            m.pop()

    return h


def _call(static: bool):
    def h(m: Machine, ins: Instruction) -> None:
        args = [m.pop() for _ in range(6 if static else 7)]
        if static:
            args.insert(2, cword(0))
        gas_w, to_w, val_w, io_w, il_w, oo_w, ol_w = args
        in_off = m.concrete(io_w, ins.pc, "call input offset")
        in_len = m.concrete(il_w, ins.pc, "call input size")
        out_off = m.concrete(oo_w, ins.pc, "call output offset")
        out_len = m.concrete(ol_w, ins.pc, "call output size")
        parts = m.mem_parts(in_off, in_len)
        conc = [
            (w.c if w.c is not None else (w.e.value if isinstance(w.e, Const) else 0)) for w in args
        ]
        conc[3], conc[4], conc[5], conc[6] = in_off, in_len, out_off, out_len
        if not static and ins.opcode.mnemonic == "CALL" and ins.pc is not None:
            analysis = sink_decompose(
                ins.pc, conc, [w.t for w in args], m.mem_c, m.mem_t, address=m.env.address, depth=0
            )
            exprs = {"gas": gas_w.e, "target": mk("and", to_w.e, const(ADDRESS_MASK)), "value": val_w.e}
            if in_len >= 4:
                exprs["selector"] = concat([ZERO] * 28 + parts[:4])
                for k in range((in_len - 4 + 31) // 32):
                    lo = 4 + 32 * k
                    word = parts[lo:lo + 32]
                    word = word + [ZERO] * (32 - len(word))
                    exprs[f"arg{k + 1}"] = concat(word)
            labels = frozenset().union(*(w.t.all for w in args[:3]), *analysis.byte_taints)
            ev = CallEvent(analysis, exprs, tuple(m.constraints), m.steps, labels)
            m.events.append(ev)
            if m.on_call is not None:
                m.on_call(m, ev)
        m.calls_made += 1
        in_taint = frozenset().union(*(w.t.all for w in args), m.mem_t.range_union(in_off, in_len))
        data = m.mem_concrete(in_off, in_len)
        to_concrete = to_w.c is not None or isinstance(to_w.e, Const)
        val_concrete = val_w.c is not None or isinstance(val_w.e, Const)
        if data is not None and to_concrete and val_concrete:
            to = conc[1] & ADDRESS_MASK
            ctx = _Context(m.world, m.env.origin.c if m.env.origin.c is not None else 0, m.env.gas_price, 64, False)
            ok, ret, _left = message_call(
                ctx, m.env.address, to, conc[2], data, min(conc[0], max(m.gas, 0)), 1, static, None
            )
            m.returndata = ret
            m.returndata_t = in_taint
            if out_len:
                n = min(out_len, len(ret))
                m.mem_write_parts(out_off, [const(b) for b in ret[:n]], ret[:n])
                m.mem_t.write(out_off, [in_taint] * n)
            m.push(SymWord(int(ok), const(int(ok)), uniform(in_taint)))
        else:
            v = m.fresh_var("ret", 1)
            m.returndata = b""
            m.returndata_t = in_taint
            m.push(SymWord(None, v, uniform(in_taint)))

    return h


_HANDLERS: dict[str, Callable[[Machine, Instruction], None]] = {
    "STOP": _h_stop,
    "INVALID": _h_invalid,
    "RETURN": _h_return,
    "REVERT": _h_revert,
    "SELFDESTRUCT": _h_selfdestruct,
    "POP": _h_pop,
    "JUMPDEST": _h_jumpdest,
    "JUMP": _h_jump,
    "JUMPI": _h_jumpi,
    "PC": _h_pc,
    "GAS": _h_gas,
    "MSIZE": _h_msize,
    "ADDRESS": _h_address,
    "CALLER": _h_caller,
    "ORIGIN": _h_origin,
    "CALLVALUE": _h_callvalue,
    "CALLDATASIZE": _h_calldatasize,
    "CALLDATALOAD": _h_calldataload,
    "CALLDATACOPY": _h_calldatacopy,
    "CODESIZE": _h_codesize,
    "CODECOPY": _h_codecopy,
    "RETURNDATASIZE": _h_returndatasize,
    "RETURNDATACOPY": _h_returndatacopy,
    "MLOAD": _h_mload,
    "MSTORE": _h_mstore,
    "MSTORE8": _h_mstore8,
    "SHA3": _h_sha3,
    "SLOAD": _h_sload,
    "SSTORE": _h_sstore,
    "BALANCE": _addr_query(lambda m, a: m.world.balance(a), "balance"),
    "EXTCODESIZE": _addr_query(_extcodesize, "extcodesize"),
    "EXTCODEHASH": _addr_query(_extcodehash, "extcodehash"),
    "SELFBALANCE": _world_word(lambda m: m.world.balance(m.env.address)),
    "GASPRICE": _world_word(lambda m: m.env.gas_price),
    "BLOCKHASH": _h_blockhash,
    "COINBASE": _world_word(lambda m: m.world.block.coinbase),
    "TIMESTAMP": _world_word(lambda m: m.world.block.timestamp),
    "NUMBER": _world_word(lambda m: m.world.block.number),
    "GASLIMIT": _world_word(lambda m: m.world.block.gaslimit),
    "CHAINID": _world_word(lambda m: m.world.block.chain_id),
    "BASEFEE": _world_word(lambda m: m.world.block.basefee),
    "PREVRANDAO": _world_word(lambda m: 0),
    "CALL": _call(False),
    "STATICCALL": _call(True),
}
for _n in range(1, 17):
    _HANDLERS[f"DUP{_n}"] = _dup(_n)
    _HANDLERS[f"SWAP{_n}"] = _swap(_n)
for _n in range(5):
    _HANDLERS[f"LOG{_n}"] = _log(_n)

__all__ = ["CallEvent", "Env", "Fork", "Halted", "Machine", "PathConstraint", "SymWord", "cword"]
