"""Concrete EVM execution over a :class:`WorldState`.

Programs are executed through their instruction list rather than raw bytes,
so instrumented programs (with PC-less injected instructions and a virtual
branch table) run on the same interpreter as the original code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple

from ..bytecode import Executable, Instruction
from ..words import ADDRESS_MASK, BINARY, TERNARY, UNARY, keccak_int
from .erc20 import EventLog, call_token
from .state import Account, WorldState

MAX_STACK = 1024
DEFAULT_MAX_DEPTH = 64
DEFAULT_GAS = 3_000_000

UNSUPPORTED = frozenset({"CREATE", "CREATE2", "CALLCODE", "DELEGATECALL", "EXTCODECOPY"})
IDENTITY_PRECOMPILE = 0x04


class Halt(Exception):
    def __init__(self, status: str, data: bytes = b"", reason: str = ""):
        self.status = status
        self.data = data
        self.reason = reason


class TraceStep(NamedTuple):
    pc: int | None
    op: str
    address: int
    depth: int


class CallRecord(NamedTuple):
    caller: int
    callee: int
    value: int
    calldata: bytes
    depth: int
    success: bool


@dataclass
class Tx:
    sender: int
    to: int
    value: int = 0
    data: bytes = b""
    gas: int = DEFAULT_GAS
    gas_price: int = 0


@dataclass
class ExecResult:
    status: str  # "success" | "revert" | "fault"
    return_data: bytes = b""
    logs: list[EventLog] = field(default_factory=list)
    state_delta: dict[int, dict[str, Any]] = field(default_factory=dict)
    trace: list[TraceStep] = field(default_factory=list)
    calls: list[CallRecord] = field(default_factory=list)
    gas_used: int = 0
    error: str = ""

    @property
    def success(self) -> bool:
        return self.status == "success"

    def dump_trace(self) -> str:
        """One ``pc opcode`` pair per line (pc ``-`` for injected instructions)."""
        return "\n".join(
            f"{'-' if s.pc is None else hex(s.pc)} {s.op}" for s in self.trace
        )


def reached_pc(result: ExecResult, pc: int, address: int | None = None) -> bool:
    """True iff ``pc`` was executed (optionally in the code at ``address``)."""
    return any(s.pc == pc and (address is None or s.address == address) for s in result.trace)


class _Context:
    """Per-transaction data shared by all frames."""

    __slots__ = ("world", "origin", "gas_price", "trace", "calls", "max_depth", "record_trace", "errors", "top_halt")

    def __init__(self, world: WorldState, origin: int, gas_price: int, max_depth: int, record_trace: bool):
        self.world = world
        self.origin = origin
        self.gas_price = gas_price
        self.trace: list[TraceStep] = []
        self.calls: list[CallRecord] = []
        self.max_depth = max_depth
        self.record_trace = record_trace
        self.errors: list[str] = []
        self.top_halt: Halt | None = None


def _mem_cost(words: int) -> int:
    return 3 * words + words * words // 512


class Frame:
    """One message-call frame executing an :class:`Executable`."""

    def __init__(
        self,
        ctx: _Context,
        program: Executable,
        address: int,
        caller: int,
        value: int,
        calldata: bytes,
        gas: int,
        depth: int,
        static: bool = False,
    ):
        self.ctx = ctx
        self.program = program
        self.instrs = program.instructions
        self.targets = program.targets
        self.code_end = program.code_end
        self.address = address
        self.caller = caller
        self.value = value
        self.calldata = calldata
        self.gas = gas
        self.depth = depth
        self.static = static
        self.stack: list[int] = []
        self.memory = bytearray()
        self.idx = 0
        # False right after a jump: landing on code_end then means the table, not the end of code
        self.sequential = True
        self.logs: list[EventLog] = []
        self.returndata = b""

    # helpers

    def pop(self) -> int:
        try:
            return self.stack.pop()
        except IndexError:
            raise Halt("fault", reason="stack underflow") from None

    def push(self, v: int) -> None:
        if len(self.stack) >= MAX_STACK:
            raise Halt("fault", reason="stack overflow")
        self.stack.append(v)

    def use_gas(self, n: int) -> None:
        self.gas -= n
        if self.gas < 0:
            raise Halt("fault", reason="out of gas")

    def extend(self, off: int, size: int) -> None:
        if size == 0:
            return
        end = off + size
        if end > 1 << 32:
            raise Halt("fault", reason="out of gas")
        cur = len(self.memory)
        if end > cur:
            new = (end + 31) // 32 * 32
            self.use_gas(_mem_cost(new // 32) - _mem_cost(cur // 32))
            self.memory.extend(b"\x00" * (new - cur))

    def mread(self, off: int, size: int) -> bytes:
        if size == 0:
            return b""
        self.extend(off, size)
        return bytes(self.memory[off:off + size])

    def account(self) -> Account:
        return self.ctx.world.account(self.address)

    # execution

    def run(self) -> Halt:
        try:
            while True:
                self.step()
        except Halt as h:
            return h

    def step(self) -> None:
        """Execute exactly one instruction."""
        idx = self.idx
        if (idx == self.code_end and self.sequential) or idx >= len(self.instrs):
            raise Halt("success")  # ran off the end of the code
        self.sequential = True
        ins = self.instrs[idx]
        name = ins.opcode.mnemonic
        if self.ctx.record_trace:
            self.ctx.trace.append(TraceStep(ins.pc, name, self.address, self.depth))
        self.use_gas(3)
        self.idx = idx + 1
        if ins.opcode.immediate_len:
            self.push(ins.arg)
            return
        fn = BINARY.get(name)
        if fn is not None:
            st = self.stack
            if len(st) < 2:
                raise Halt("fault", reason="stack underflow")
            a = st.pop()
            st[-1] = fn(a, st[-1])
            return
        handler = _HANDLERS.get(name)
        if handler is None:
            if name in UNSUPPORTED:
                self.ctx.errors.append(f"unsupported: {name}")
                raise Halt("fault", reason=f"unsupported: {name}")
            raise Halt("fault", reason=f"invalid opcode {ins.opcode.value:#04x}")
        handler(self, ins)

    def jump_to(self, dest: int) -> None:
        idx = self.targets.get(dest)
        if idx is None or self.instrs[idx].opcode.mnemonic != "JUMPDEST":
            raise Halt("fault", reason=f"invalid jump destination {dest:#x}")
        self.idx = idx
        self.sequential = False


# --- opcode handlers ---------------------------------------------------------

def _unary(name: str):
    fn = UNARY[name]

    def h(f: Frame, ins: Instruction) -> None:
        f.push(fn(f.pop()))

    return h


def _ternary(name: str):
    fn = TERNARY[name]

    def h(f: Frame, ins: Instruction) -> None:
        a, b, n = f.pop(), f.pop(), f.pop()
        f.push(fn(a, b, n))

    return h


def _stop(f: Frame, ins: Instruction) -> None:
    raise Halt("success")


def _invalid(f: Frame, ins: Instruction) -> None:
    raise Halt("fault", reason="INVALID")


def _return(f: Frame, ins: Instruction) -> None:
    off, size = f.pop(), f.pop()
    raise Halt("success", f.mread(off, size))


def _revert(f: Frame, ins: Instruction) -> None:
    off, size = f.pop(), f.pop()
    raise Halt("revert", f.mread(off, size))


def _selfdestruct(f: Frame, ins: Instruction) -> None:
    f.pop()
    if f.static:
        raise Halt("fault", reason="state change in static call")
    raise Halt("success")


def _sha3(f: Frame, ins: Instruction) -> None:
    off, size = f.pop(), f.pop()
    f.use_gas(30 + 6 * ((size + 31) // 32))
    f.push(keccak_int(f.mread(off, size)))


def _address(f: Frame, ins: Instruction) -> None:
    f.push(f.address)


def _balance(f: Frame, ins: Instruction) -> None:
    f.push(f.ctx.world.balance(f.pop() & ADDRESS_MASK))


def _selfbalance(f: Frame, ins: Instruction) -> None:
    f.push(f.ctx.world.balance(f.address))


def _origin(f: Frame, ins: Instruction) -> None:
    f.push(f.ctx.origin)


def _caller(f: Frame, ins: Instruction) -> None:
    f.push(f.caller)


def _callvalue(f: Frame, ins: Instruction) -> None:
    f.push(f.value)


def _calldataload(f: Frame, ins: Instruction) -> None:
    off = f.pop()
    cd = f.calldata
    if off >= len(cd):
        f.push(0)
    else:
        f.push(int.from_bytes(cd[off:off + 32].ljust(32, b"\x00"), "big"))


def _calldatasize(f: Frame, ins: Instruction) -> None:
    f.push(len(f.calldata))


def _copy_into(f: Frame, src: bytes, mem_off: int, src_off: int, size: int) -> None:
    if size == 0:
        return
    f.use_gas(3 * ((size + 31) // 32))
    f.extend(mem_off, size)
    chunk = src[src_off:src_off + size] if src_off < len(src) else b""
    f.memory[mem_off:mem_off + size] = chunk.ljust(size, b"\x00")


def _calldatacopy(f: Frame, ins: Instruction) -> None:
    m, s, n = f.pop(), f.pop(), f.pop()
    _copy_into(f, f.calldata, m, s, n)


def _codesize(f: Frame, ins: Instruction) -> None:
    f.push(len(f.program.code))


def _codecopy(f: Frame, ins: Instruction) -> None:
    m, s, n = f.pop(), f.pop(), f.pop()
    _copy_into(f, f.program.code, m, s, n)


def _gasprice(f: Frame, ins: Instruction) -> None:
    f.push(f.ctx.gas_price)


def _extcodesize(f: Frame, ins: Instruction) -> None:
    acct = f.ctx.world.get(f.pop() & ADDRESS_MASK)
    if acct is None:
        f.push(0)
    elif acct.token is not None:
        f.push(1)  # native handlers look like deployed code
    else:
        f.push(len(acct.code))


def _extcodehash(f: Frame, ins: Instruction) -> None:
    acct = f.ctx.world.get(f.pop() & ADDRESS_MASK)
    if acct is None:
        f.push(0)
    else:
        f.push(keccak_int(acct.code))


def _returndatasize(f: Frame, ins: Instruction) -> None:
    f.push(len(f.returndata))


def _returndatacopy(f: Frame, ins: Instruction) -> None:
    m, s, n = f.pop(), f.pop(), f.pop()
    if s + n > len(f.returndata):
        raise Halt("fault", reason="return data out of bounds")
    _copy_into(f, f.returndata, m, s, n)


def _blockhash(f: Frame, ins: Instruction) -> None:
    f.pop()
    f.push(0)


def _block_field(attr: str):
    def h(f: Frame, ins: Instruction) -> None:
        f.push(getattr(f.ctx.world.block, attr))

    return h


def _prevrandao(f: Frame, ins: Instruction) -> None:
    f.push(0)


def _pop(f: Frame, ins: Instruction) -> None:
    f.pop()


def _mload(f: Frame, ins: Instruction) -> None:
    off = f.pop()
    f.push(int.from_bytes(f.mread(off, 32), "big"))


def _mstore(f: Frame, ins: Instruction) -> None:
    off, v = f.pop(), f.pop()
    f.extend(off, 32)
    f.memory[off:off + 32] = v.to_bytes(32, "big")


def _mstore8(f: Frame, ins: Instruction) -> None:
    off, v = f.pop(), f.pop()
    f.extend(off, 1)
    f.memory[off] = v & 0xFF


def _sload(f: Frame, ins: Instruction) -> None:
    f.use_gas(97)
    f.push(f.ctx.world.storage_at(f.address, f.pop()))


def _sstore(f: Frame, ins: Instruction) -> None:
    if f.static:
        raise Halt("fault", reason="state change in static call")
    f.use_gas(97)
    slot, v = f.pop(), f.pop()
    st = f.account().storage
    if v:
        st[slot] = v
    else:
        st.pop(slot, None)


def _jump(f: Frame, ins: Instruction) -> None:
    f.jump_to(f.pop())


def _jumpi(f: Frame, ins: Instruction) -> None:
    dest, cond = f.pop(), f.pop()
    if cond:
        f.jump_to(dest)


def _pc(f: Frame, ins: Instruction) -> None:
    f.push(ins.pc if ins.pc is not None else 0)


def _msize(f: Frame, ins: Instruction) -> None:
    f.push(len(f.memory))


def _gas(f: Frame, ins: Instruction) -> None:
    f.push(f.gas)


def _jumpdest(f: Frame, ins: Instruction) -> None:
    pass


def _push0(f: Frame, ins: Instruction) -> None:
    f.push(0)


def _dup(n: int):
    def h(f: Frame, ins: Instruction) -> None:
        if len(f.stack) < n:
            raise Halt("fault", reason="stack underflow")
        f.push(f.stack[-n])

    return h


def _swap(n: int):
    def h(f: Frame, ins: Instruction) -> None:
        st = f.stack
        if len(st) <= n:
            raise Halt("fault", reason="stack underflow")
        st[-1], st[-1 - n] = st[-1 - n], st[-1]

    return h


def _log(n: int):
    def h(f: Frame, ins: Instruction) -> None:
        if f.static:
            raise Halt("fault", reason="state change in static call")
        off, size = f.pop(), f.pop()
        topics = tuple(f.pop() for _ in range(n))
        f.use_gas(372 + 375 * n + 8 * size)
        f.logs.append(EventLog(f.address, topics, f.mread(off, size)))

    return h


def _call(static_op: bool):
    def h(f: Frame, ins: Instruction) -> None:
        gas_req, to = f.pop(), f.pop() & ADDRESS_MASK
        value = 0 if static_op else f.pop()
        in_off, in_len, out_off, out_len = f.pop(), f.pop(), f.pop(), f.pop()
        if value and f.static:
            raise Halt("fault", reason="value transfer in static call")
        f.use_gas(97)
        data = f.mread(in_off, in_len)
        f.extend(out_off, out_len)
        avail = f.gas - f.gas // 64
        child_gas = min(gas_req, avail)
        f.gas -= child_gas
        ok, ret, left = message_call(
            f.ctx, f.address, to, value, data, child_gas, f.depth + 1, f.static or static_op, f.logs
        )
        f.gas += left
        f.returndata = ret
        if out_len:
            n = min(out_len, len(ret))
            f.memory[out_off:out_off + n] = ret[:n]
        f.push(1 if ok else 0)

    return h


_HANDLERS: dict[str, Any] = {
    "STOP": _stop,
    "INVALID": _invalid,
    "RETURN": _return,
    "REVERT": _revert,
    "SELFDESTRUCT": _selfdestruct,
    "ISZERO": _unary("ISZERO"),
    "NOT": _unary("NOT"),
    "ADDMOD": _ternary("ADDMOD"),
    "MULMOD": _ternary("MULMOD"),
    "SHA3": _sha3,
    "ADDRESS": _address,
    "BALANCE": _balance,
    "SELFBALANCE": _selfbalance,
    "ORIGIN": _origin,
    "CALLER": _caller,
    "CALLVALUE": _callvalue,
    "CALLDATALOAD": _calldataload,
    "CALLDATASIZE": _calldatasize,
    "CALLDATACOPY": _calldatacopy,
    "CODESIZE": _codesize,
    "CODECOPY": _codecopy,
    "GASPRICE": _gasprice,
    "EXTCODESIZE": _extcodesize,
    "EXTCODEHASH": _extcodehash,
    "RETURNDATASIZE": _returndatasize,
    "RETURNDATACOPY": _returndatacopy,
    "BLOCKHASH": _blockhash,
    "COINBASE": _block_field("coinbase"),
    "TIMESTAMP": _block_field("timestamp"),
    "NUMBER": _block_field("number"),
    "GASLIMIT": _block_field("gaslimit"),
    "CHAINID": _block_field("chain_id"),
    "BASEFEE": _block_field("basefee"),
    "PREVRANDAO": _prevrandao,
    "POP": _pop,
    "MLOAD": _mload,
    "MSTORE": _mstore,
    "MSTORE8": _mstore8,
    "SLOAD": _sload,
    "SSTORE": _sstore,
    "JUMP": _jump,
    "JUMPI": _jumpi,
    "PC": _pc,
    "MSIZE": _msize,
    "GAS": _gas,
    "JUMPDEST": _jumpdest,
    "PUSH0": _push0,
    "CALL": _call(False),
    "STATICCALL": _call(True),
}
for _n in range(1, 17):
    _HANDLERS[f"DUP{_n}"] = _dup(_n)
    _HANDLERS[f"SWAP{_n}"] = _swap(_n)
for _n in range(5):
    _HANDLERS[f"LOG{_n}"] = _log(_n)


# --- message calls -------------------------------------------------------------

def message_call(
    ctx: _Context,
    caller: int,
    to: int,
    value: int,
    data: bytes,
    gas: int,
    depth: int,
    static: bool,
    parent_logs: list[EventLog] | None,
) -> tuple[bool, bytes, int]:
    """Run a nested call; returns (success, return data, gas left).

    World changes are rolled back on failure; on success the callee's logs are
    appended to ``parent_logs``.
    """
    world = ctx.world
    if depth > ctx.max_depth or world.balance(caller) < value:
        ctx.calls.append(CallRecord(caller, to, value, data, depth, False))
        return False, b"", gas
    saved = world.copy_accounts()
    if value:
        world.account(caller).balance -= value
        world.account(to).balance += value
    acct = world.get(to)
    logs: list[EventLog] = []
    ok, ret, left = True, b"", gas
    if acct is not None and acct.token is not None:
        if static:
            probe = acct.token.copy()
            ok, ret, logs = call_token(to, probe, caller, data)
            if logs:
                ok, ret, logs = False, b"", []
        else:
            ok, ret, logs = call_token(to, acct.token, caller, data)
        left = gas - min(gas, 2_000)
    elif to == IDENTITY_PRECOMPILE:
        ret = data
    elif 0 < to <= 9:
        ctx.errors.append(f"unsupported: precompile {to:#x}")
        ok, left = False, 0
    else:
        program = world.executable(to)
        if program is not None:
            frame = Frame(ctx, program, to, caller, value, data, gas, depth, static)
            halt = frame.run()
            if depth == 0:
                ctx.top_halt = halt
            ok = halt.status == "success"
            ret = halt.data
            left = frame.gas if halt.status != "fault" else 0
            logs = frame.logs
    ctx.calls.append(CallRecord(caller, to, value, data, depth, ok))
    if ok:
        if parent_logs is not None:
            parent_logs.extend(logs)
    else:
        world.accounts = saved
    return ok, ret, left


def _delta(before: dict[int, Account], after: dict[int, Account]) -> dict[int, dict[str, Any]]:
    out: dict[int, dict[str, Any]] = {}
    for addr, acct in after.items():
        old = before.get(addr)
        entry: dict[str, Any] = {}
        if old is None or old.balance != acct.balance:
            entry["balance"] = acct.balance
        old_st = old.storage if old else {}
        changed = {k: v for k, v in acct.storage.items() if old_st.get(k, 0) != v}
        changed.update({k: 0 for k in old_st if k not in acct.storage})
        if changed:
            entry["storage"] = changed
        if acct.token is not None and (old is None or old.token != acct.token):
            entry["token_balances"] = dict(acct.token.balances)
        if entry:
            out[addr] = entry
    return out


def execute_transaction(
    world: WorldState,
    tx: Tx,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    record_trace: bool = True,
) -> ExecResult:
    """Execute ``tx`` against ``world``; the world is changed only on success."""
    ctx = _Context(world, tx.sender, tx.gas_price, max_depth, record_trace)
    before = world.copy_accounts()
    if world.balance(tx.sender) < tx.value:
        return ExecResult("fault", error="insufficient balance for value")
    logs: list[EventLog] = []
    # the top-level frame is a message call at depth 0
    ok, ret, left = message_call(ctx, tx.sender, tx.to, tx.value, tx.data, tx.gas, 0, False, logs)
    status = "success" if ok else "revert"
    error = ""
    halt = ctx.top_halt
    if not ok:
        if halt is not None:
            status = halt.status
            error = halt.reason
        elif ctx.errors:
            status, error = "fault", ctx.errors[-1]
    result = ExecResult(
        status,
        ret if ok or status == "revert" else b"",
        logs if ok else [],
        _delta(before, world.accounts) if ok else {},
        ctx.trace,
        ctx.calls,
        tx.gas - left,
        error,
    )
    if ctx.errors and not result.error:
        result.error = ctx.errors[-1]
    return result
