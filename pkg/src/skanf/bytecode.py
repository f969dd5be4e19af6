"""Bytecode decoding: instruction stream, jump destinations, hex I/O."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from . import kernels
from .opcodes import OPCODES, OPCODES_NO_PUSH0, Opcode


@dataclass(frozen=True, slots=True)
class Instruction:
    """One decoded (or injected) instruction.

    ``pc`` is None for instructions injected by the deobfuscator that have no
    address; branch-table code carries virtual pcs and ``virtual=True``.
    """

    opcode: Opcode
    pc: int | None
    immediate: bytes = b""
    size: int = 1
    virtual: bool = False
    arg: int = field(default=0, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.immediate:
            object.__setattr__(self, "arg", int.from_bytes(self.immediate, "big"))

    @property
    def name(self) -> str:
        return self.opcode.mnemonic

    @property
    def injected(self) -> bool:
        return self.pc is None or self.virtual

    def encode(self) -> bytes:
        return bytes((self.opcode.value,)) + self.immediate[: self.size - 1]

    def __str__(self) -> str:
        text = self.name
        if self.immediate:
            text += " 0x" + self.immediate.hex()
        return text


class Executable(Protocol):
    """What the interpreters need from a program: a linear instruction list,
    the valid jump targets (pc -> index) and where the real code ends."""

    code: bytes
    instructions: Sequence[Instruction]
    targets: dict[int, int]
    code_end: int


@dataclass(frozen=True)
class Program:
    code: bytes
    instructions: tuple[Instruction, ...]
    jumpdests: frozenset[int]
    # pc -> index into ``instructions``
    index: dict[int, int] = field(repr=False, compare=False)
    targets: dict[int, int] = field(repr=False, compare=False)

    @property
    def code_end(self) -> int:
        return len(self.instructions)

    def at(self, pc: int) -> Instruction:
        return self.instructions[self.index[pc]]

    def encode(self) -> bytes:
        return b"".join(ins.encode() for ins in self.instructions if ins.pc is not None)

    def __copy__(self) -> Program:
        return self

    def __deepcopy__(self, memo) -> Program:
        return self


def disassemble(code: bytes, push0: bool = True) -> Program:
    """Decode ``code`` into a :class:`Program`. Never fails."""
    code = bytes(code)
    table = OPCODES if push0 else OPCODES_NO_PUSH0
    starts, jds = kernels.scan_code(code)
    n = len(code)
    instructions = []
    for pc in starts:
        opc = table[code[pc]]
        k = opc.immediate_len
        if k:
            raw = code[pc + 1:pc + 1 + k]
            instructions.append(Instruction(opc, pc, raw + b"\x00" * (k - len(raw)), 1 + len(raw)))
        else:
            instructions.append(Instruction(opc, pc))
    index = {ins.pc: i for i, ins in enumerate(instructions)}
    jumpdests = frozenset(jds)
    targets = {pc: index[pc] for pc in jds}
    assert sum(ins.size for ins in instructions) == n
    return Program(code, tuple(instructions), jumpdests, index, targets)


def collect_jumpdests(program: Program) -> list[int]:
    """All legal jump destinations, ascending."""
    return sorted(program.jumpdests)


def parse_hex(text: str) -> bytes:
    text = text.strip()
    if text[:2].lower() == "0x":
        text = text[2:]
    text = "".join(text.split())
    return bytes.fromhex(text)


def load_bytecode(path: str | Path) -> bytes:
    """Read bytecode from a hex text file (optional 0x) or a raw binary file."""
    data = Path(path).read_bytes()
    try:
        return parse_hex(data.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        return data
