"""Byte-level taint labels, propagation rules and CALL sink decomposition."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .words import ADDRESS_MASK


class CalldataByte(int):
    """Label for one byte of the analyzed frame's calldata."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"CB({int(self):#x})"


class EnvLabel(str):
    __slots__ = ()

    def __repr__(self) -> str:
        return str(self)


CALLER = EnvLabel("Caller")
ORIGIN = EnvLabel("Origin")
CALLVALUE = EnvLabel("CallValue")

Label = CalldataByte | EnvLabel
LabelSet = frozenset

NO_LABELS: frozenset = frozenset()


def label_str(label: Any) -> str:
    return repr(label)


def calldata_labels(labels: Iterable[Any]) -> frozenset[CalldataByte]:
    return frozenset(x for x in labels if isinstance(x, CalldataByte))


class Taint:
    """Taint of one 256-bit word.

    ``pos`` holds 32 per-byte label sets (index 0 = most significant byte) or
    is None when every byte carries the same set ``all``.
    """

    __slots__ = ("pos", "all")

    def __init__(self, pos: tuple[frozenset, ...] | None, labels: frozenset):
        self.pos = pos
        self.all = labels

    def __repr__(self) -> str:
        if self.pos is None:
            return f"Taint({sorted(self.all, key=repr)})"
        return f"Taint(pos={[sorted(p, key=repr) for p in self.pos]})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taint) and self.positions() == other.positions()

    def __hash__(self) -> int:
        return hash(self.positions())

    def __bool__(self) -> bool:
        return bool(self.all)

    def byte(self, i: int) -> frozenset:
        return self.all if self.pos is None else self.pos[i]

    def positions(self) -> tuple[frozenset, ...]:
        return self.pos if self.pos is not None else (self.all,) * 32

    @property
    def calldata(self) -> frozenset[CalldataByte]:
        return calldata_labels(self.all)


EMPTY = Taint(None, NO_LABELS)


def uniform(labels: Iterable[Any]) -> Taint:
    s = labels if isinstance(labels, frozenset) else frozenset(labels)
    return Taint(None, s) if s else EMPTY


def positional(pos: Sequence[frozenset]) -> Taint:
    pos = tuple(pos)
    first = pos[0]
    if all(p == first for p in pos):
        return uniform(first)
    return Taint(pos, frozenset().union(*pos))


def join(*taints: Taint) -> Taint:
    """Blanket union: every result byte carries every operand label."""
    nonempty = [t for t in taints if t.all]
    if not nonempty:
        return EMPTY
    if len(nonempty) == 1 and nonempty[0].pos is None:
        return nonempty[0]
    return uniform(frozenset().union(*(t.all for t in nonempty)))


def bytewise(a: Taint, b: Taint) -> Taint:
    """Positional union, for byte-parallel operators (AND/OR/XOR)."""
    if not b.all:
        return a
    if not a.all:
        return b
    if a.pos is None and b.pos is None:
        return uniform(a.all | b.all)
    pa, pb = a.positions(), b.positions()
    return positional(x | y for x, y in zip(pa, pb))


def mask_taint(mask: int, other: Taint) -> Taint:
    """AND with an untainted constant: bytes where the mask is 0x00 are cleared."""
    if not other.all:
        return EMPTY
    pos = other.positions()
    return positional(pos[i] if (mask >> (8 * (31 - i))) & 0xFF else NO_LABELS for i in range(32))


def add_address_taint(t: Taint, addr: Taint) -> Taint:
    if not addr.all:
        return t
    if t.pos is None:
        return uniform(t.all | addr.all)
    return positional(p | addr.all for p in t.pos)


# --- sources -----------------------------------------------------------------

def all_calldata(length: int) -> frozenset[CalldataByte]:
    return frozenset(CalldataByte(i) for i in range(length))


def calldataload_taint(offset: int, offset_taint: Taint, calldata_len: int) -> Taint:
    if offset_taint.all:
        # symbolic offset: any calldata byte may flow in
        return uniform(all_calldata(calldata_len) | offset_taint.all)
    return positional(
        frozenset({CalldataByte(offset + i)}) if offset + i < calldata_len else NO_LABELS for i in range(32)
    )


def source_taint(opcode: str, operands: Sequence[int] = (), calldata_len: int = 0,
                 operand_taints: Sequence[Taint] = ()) -> Taint:
    """Taint introduced by a source opcode (the word pushed, or copied bytes for CALLDATACOPY)."""
    if opcode == "CALLDATALOAD":
        t = operand_taints[0] if operand_taints else EMPTY
        return calldataload_taint(operands[0], t, calldata_len)
    if opcode == "CALLER":
        return uniform({CALLER})
    if opcode == "ORIGIN":
        return uniform({ORIGIN})
    if opcode == "CALLVALUE":
        return uniform({CALLVALUE})
    raise ValueError(f"{opcode} is not a taint source")


def calldatacopy_taints(src: int, size: int, calldata_len: int, addr_taint: Taint = EMPTY) -> list[frozenset]:
    """Per-byte taints written by CALLDATACOPY(mem, src, size)."""
    extra = addr_taint.all
    if extra:
        whole = all_calldata(calldata_len) | extra
        return [whole] * size
    return [frozenset({CalldataByte(src + i)}) if src + i < calldata_len else NO_LABELS for i in range(size)]


BYTEWISE_OPS = frozenset({"AND", "OR", "XOR"})


def propagate(opcode: str, operand_taints: Sequence[Taint], operands: Sequence[int] | None = None) -> Taint:
    """Result taint of a non-source, non-memory opcode.

    Union of operand taints; AND against an untainted constant clears
    fully masked-out byte positions; byte-parallel ops keep positions.
    """
    if opcode == "AND" and operands is not None:
        a, b = operand_taints
        if not a.all and b.all:
            return mask_taint(operands[0], b)
        if not b.all and a.all:
            return mask_taint(operands[1], a)
    if opcode in BYTEWISE_OPS:
        return bytewise(*operand_taints)
    if opcode == "NOT":
        return operand_taints[0]
    return join(*operand_taints)


# --- memory and storage -------------------------------------------------------------------

class TaintedMemory:
    """Byte offset -> label set; absent offsets are untainted."""

    __slots__ = ("cells",)

    def __init__(self, cells: dict[int, frozenset] | None = None):
        self.cells: dict[int, frozenset] = cells if cells is not None else {}

    def copy(self) -> TaintedMemory:
        return TaintedMemory(dict(self.cells))

    def write(self, offset: int, taints: Sequence[frozenset]) -> None:
        cells = self.cells
        for i, t in enumerate(taints):
            if t:
                cells[offset + i] = t
            else:
                cells.pop(offset + i, None)

    def read(self, offset: int, size: int) -> list[frozenset]:
        get = self.cells.get
        return [get(offset + i, NO_LABELS) for i in range(size)]

    def store_word(self, offset: int, t: Taint, addr: Taint = EMPTY) -> None:
        self.write(offset, add_address_taint(t, addr).positions())

    def load_word(self, offset: int, addr: Taint = EMPTY) -> Taint:
        if not self.cells:
            return uniform(addr.all)
        return add_address_taint(positional(self.read(offset, 32)), addr)

    def range_union(self, offset: int, size: int) -> frozenset:
        out: set = set()
        for t in self.read(offset, size):
            out |= t
        return frozenset(out)


class TaintedStorage:
    """Slot -> word taint; persists across frames of one transaction."""

    __slots__ = ("slots", "tainted_address")

    def __init__(self) -> None:
        self.slots: dict[tuple[int, int], Taint] = {}
        # (address, slot) pairs last written through a tainted slot index
        self.tainted_address: set[tuple[int, int]] = set()

    def copy(self) -> TaintedStorage:
        st = TaintedStorage()
        st.slots = dict(self.slots)
        st.tainted_address = set(self.tainted_address)
        return st

    def store(self, address: int, slot: int, t: Taint, slot_taint: Taint = EMPTY) -> None:
        key = (address, slot)
        t = add_address_taint(t, slot_taint)
        if slot_taint.all:
            self.tainted_address.add(key)
        else:
            self.tainted_address.discard(key)
        if t.all:
            self.slots[key] = t
        else:
            self.slots.pop(key, None)

    def load(self, address: int, slot: int, slot_taint: Taint = EMPTY) -> Taint:
        return add_address_taint(self.slots.get((address, slot), EMPTY), slot_taint)


# --- sinks -------------------------------------------------------------------------

CONTROLLABLE = "Controllable"
FIXED = "Fixed"


@dataclass(frozen=True)
class ParamRecord:
    role: str  # gas | target | value | selector | argN
    value: int
    labels: frozenset

    @property
    def controllable(self) -> bool:
        return any(isinstance(x, CalldataByte) for x in self.labels)

    @property
    def cls(self) -> str:
        return CONTROLLABLE if self.controllable else FIXED

    @property
    def calldata_labels(self) -> frozenset[CalldataByte]:
        return calldata_labels(self.labels)

    def to_json(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "valueHex": hex(self.value),
            "taintLabels": sorted((label_str(x) for x in self.labels), key=_label_key),
        }


def _label_key(s: str) -> tuple[int, int, str]:
    if s.startswith("CB("):
        return (0, int(s[3:-1], 16), s)
    return (1, 0, s)


@dataclass
class CallSiteAnalysis:
    call_pc: int
    address: int  # contract executing the CALL
    depth: int
    params: list[ParamRecord]
    calldata: bytes  # the call's own input bytes
    raw: bool = False  # fewer than 4 input bytes: no selector
    region_tainted: bool = False
    byte_taints: list[frozenset] = field(default_factory=list, repr=False)

    def param(self, role: str) -> ParamRecord | None:
        for p in self.params:
            if p.role == role:
                return p
        return None

    @property
    def target(self) -> ParamRecord:
        return self.param("target")

    @property
    def selector(self) -> ParamRecord | None:
        return self.param("selector")

    @property
    def args(self) -> list[ParamRecord]:
        return [p for p in self.params if p.role.startswith("arg")]

    def all_calldata_labels(self) -> frozenset[CalldataByte]:
        out: set = set()
        for p in self.params:
            out |= p.calldata_labels
        return frozenset(out)

    def debug_dump(self) -> dict[str, Any]:
        return {"callPC": hex(self.call_pc), "params": [p.to_json() for p in self.params]}


def sink_decompose(
    call_pc: int,
    stack_args: Sequence[int],
    arg_taints: Sequence[Taint],
    memory: bytes | bytearray,
    mem_taint: TaintedMemory,
    *,
    address: int = 0,
    depth: int = 0,
) -> CallSiteAnalysis:
    """Split a CALL into gas/target/value/selector/argument records with taints.

    ``stack_args`` are the seven CALL operands in pop order.
    """
    gas, target, value, in_off, in_len = stack_args[:5]
    region_extra = arg_taints[3].all | arg_taints[4].all
    data = bytes(memory[in_off:in_off + in_len]).ljust(in_len, b"\x00") if in_len else b""
    byte_taints = mem_taint.read(in_off, in_len) if in_len else []
    if region_extra:
        byte_taints = [t | region_extra for t in byte_taints]

    def span(lo: int, hi: int) -> frozenset:
        out: set = set()
        for t in byte_taints[lo:hi]:
            out |= t
        return frozenset(out | region_extra)

    params = [
        ParamRecord("gas", gas, arg_taints[0].all),
        ParamRecord("target", target & ADDRESS_MASK, mask_taint(ADDRESS_MASK, arg_taints[1]).all),
        ParamRecord("value", value, arg_taints[2].all),
    ]
    raw = in_len < 4
    if not raw:
        params.append(ParamRecord("selector", int.from_bytes(data[:4], "big"), span(0, 4)))
        nargs = (in_len - 4 + 31) // 32
        for k in range(nargs):
            lo = 4 + 32 * k
            word = data[lo:lo + 32].ljust(32, b"\x00")
            params.append(ParamRecord(f"arg{k + 1}", int.from_bytes(word, "big"), span(lo, lo + 32)))
    return CallSiteAnalysis(
        call_pc, address, depth, params, data, raw, bool(region_extra), byte_taints
    )
