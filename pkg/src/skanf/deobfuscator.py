"""Indirect-jump removal through an injected branch table.

Every indirect jump is redirected to a table at virtual pc 0xe000 that
compares the runtime destination against each legal jump destination and,
on a match, jumps to a per-destination gadget that pops the runtime value
and performs a direct jump. Original instructions keep their pcs; injected
instructions either carry no pc or a virtual pc beyond the real code.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

from .bytecode import Instruction, Program
from .cfg import IndirectJump, build_cfg, code_coverage, identify_indirect_jumps
from .opcodes import BY_NAME, INVALID

TABLE_BASE = 0xE000
GADGET_BASE = 0xF000
GADGET_STRIDE = 7
MIN_VIRTUAL_PC = 0x6000


class DeobfuscationError(ValueError):
    pass


def _width(value: int) -> int:
    return max(2, (value.bit_length() + 7) // 8)


def _push(value: int, width: int, pc: int | None, virtual: bool = False) -> Instruction:
    return Instruction(BY_NAME[f"PUSH{width}"], pc, value.to_bytes(width, "big"), 1 + width, virtual)


def _plain(name: str, pc: int | None, virtual: bool = False) -> Instruction:
    return Instruction(BY_NAME[name], pc, virtual=virtual)


@dataclass(frozen=True)
class TableEntry:
    dest: int
    entry_pc: int
    gadget_pc: int


@dataclass(frozen=True)
class BranchTable:
    base_pc: int
    gadget_base: int
    entries: tuple[TableEntry, ...]
    instructions: tuple[Instruction, ...] = field(repr=False)
    gadgets: tuple[Instruction, ...] = field(repr=False)

    @property
    def fallthrough_pc(self) -> int:
        return self.instructions[-1].pc


def build_branch_table(jumpdests: Iterable[int], base_pc: int = TABLE_BASE) -> BranchTable:
    """Lay out the table and gadgets for ``jumpdests`` (ascending by dest)."""
    dests = sorted(set(jumpdests))
    if not dests:
        raise DeobfuscationError("no jump destinations: nothing to deobfuscate")
    wd = _width(max(dests))
    gadget_base = max(GADGET_BASE, base_pc + 0x1000)
    # widen the gadget area upward until the table fits below it
    while True:
        stride = max(GADGET_STRIDE, 5 + wd)
        wg = _width(gadget_base + stride * (len(dests) - 1))
        entry_size = 5 + wd + wg
        table_end = base_pc + 1 + entry_size * len(dests) + 1
        if table_end <= gadget_base:
            break
        gadget_base = (table_end + 0xFFF) // 0x1000 * 0x1000

    table: list[Instruction] = [_plain("JUMPDEST", base_pc, True)]
    gadgets: list[Instruction] = []
    entries = []
    pc = base_pc + 1
    for i, dest in enumerate(dests):
        gpc = gadget_base + stride * i
        entries.append(TableEntry(dest, pc, gpc))
        table += [
            _plain("DUP1", pc, True),
            _push(dest, wd, pc + 1, True),
            _plain("EQ", pc + 2 + wd, True),
            _push(gpc, wg, pc + 3 + wd, True),
            _plain("JUMPI", pc + 4 + wd + wg, True),
        ]
        pc += entry_size
        gadgets += [
            _plain("JUMPDEST", gpc, True),
            _plain("POP", gpc + 1, True),
            _push(dest, wd, gpc + 2, True),
            _plain("JUMP", gpc + 3 + wd, True),
        ]
    table.append(Instruction(INVALID, pc, virtual=True))
    return BranchTable(base_pc, gadget_base, tuple(entries), tuple(table), tuple(gadgets))


@dataclass(frozen=True)
class Rewrite:
    jump_pc: int
    kind: str  # JUMP | JUMPI
    before: tuple[Instruction, ...]
    after: tuple[Instruction, ...]


def rewrite_jump(program: Program, jump_pc: int, table: BranchTable, indirect: set[int] | None = None) -> Rewrite:
    """Describe the injected instructions around the jump at ``jump_pc``."""
    if indirect is not None and jump_pc not in indirect:
        raise DeobfuscationError(f"jump at {jump_pc:#x} is not indirect")
    ins = program.index.get(jump_pc)
    if ins is None or program.instructions[ins].opcode.mnemonic not in ("JUMP", "JUMPI"):
        raise DeobfuscationError(f"no jump instruction at {jump_pc:#x}")
    w = _width(table.base_pc)
    if program.instructions[ins].opcode.mnemonic == "JUMP":
        return Rewrite(jump_pc, "JUMP", (_push(table.base_pc, w, None),), ())
    return Rewrite(
        jump_pc, "JUMPI", (_plain("SWAP1", None), _push(table.base_pc, w, None)), (_plain("POP", None),)
    )


@dataclass(frozen=True)
class InstrumentedProgram:
    """Original program plus injected code, executable as a linear instruction list."""

    original: Program
    instructions: tuple[Instruction, ...]
    targets: dict[int, int] = field(repr=False)
    code_end: int
    rewrites: dict[int, Rewrite]
    table: BranchTable | None
    indirect_jumps: tuple[IndirectJump, ...]

    @property
    def code(self) -> bytes:
        return self.original.code

    @property
    def obfuscated(self) -> bool:
        return bool(self.indirect_jumps)

    @property
    def injected(self) -> list[Instruction]:
        return [ins for ins in self.instructions if ins.injected]

    def index_of(self, pc: int) -> int:
        for i, ins in enumerate(self.instructions):
            if ins.pc == pc:
                return i
        raise KeyError(pc)

    def listing(self) -> str:
        """Annotated assembly: original pcs, blank pcs for injected lines, virtual pcs for the table."""
        lines = []
        for i, ins in enumerate(self.instructions):
            if i == self.code_end:
                lines.append("; --- branch table ---")
            if self.table is not None and ins.pc == self.table.gadget_base:
                lines.append("; --- gadgets ---")
            pc = "      " if ins.pc is None else f"{ins.pc:#06x}"
            note = ""
            if ins.pc is None:
                note = "  ; injected"
            elif ins.pc in self.rewrites:
                note = "  ; rewritten indirect jump"
            lines.append(f"{pc}  {ins}{note}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict[str, Any]:
        return {
            "indirect_jumps": [
                {"pc": f"{j.jump_pc:#06x}", "dest_var": j.dest_var} for j in self.indirect_jumps
            ],
            "table_entries": len(self.table.entries) if self.table else 0,
            "coverage_before": round(code_coverage(self.original), 6),
            "coverage_after": round(code_coverage(self), 6),
        }


def instrument(program: Program, jset: Iterable[IndirectJump] | None = None) -> InstrumentedProgram:
    """Rewrite every indirect jump of ``program`` against one shared table."""
    jset = tuple(sorted(identify_indirect_jumps(program) if jset is None else jset))
    if not jset:
        return InstrumentedProgram(
            program, program.instructions, dict(program.targets), program.code_end, {}, None, ()
        )
    if not program.jumpdests:
        raise DeobfuscationError("indirect jumps but no jump destinations")
    base = TABLE_BASE if len(program.code) <= TABLE_BASE else (len(program.code) + 0xFFF) // 0x1000 * 0x1000
    table = build_branch_table(program.jumpdests, base)
    indirect = {j.jump_pc for j in jset}
    rewrites = {pc: rewrite_jump(program, pc, table, indirect) for pc in sorted(indirect)}

    out: list[Instruction] = []
    for ins in program.instructions:
        rw = rewrites.get(ins.pc)
        if rw is not None:
            out.extend(rw.before)
            out.append(ins)
            out.extend(rw.after)
        else:
            out.append(ins)
    code_end = len(out)
    out.extend(table.instructions)
    out.extend(table.gadgets)
    targets = {
        ins.pc: i
        for i, ins in enumerate(out)
        if ins.opcode.mnemonic == "JUMPDEST"
        and ins.pc is not None
        and (ins.virtual or ins.pc in program.jumpdests)
    }
    return InstrumentedProgram(program, tuple(out), targets, code_end, rewrites, table, jset)


def deobfuscate(program: Program) -> InstrumentedProgram:
    cfg = build_cfg(program)
    return instrument(program, identify_indirect_jumps(program, cfg))
