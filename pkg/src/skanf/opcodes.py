"""EVM opcode table (Shanghai instruction set)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Opcode:
    value: int
    mnemonic: str
    stack_pops: int
    stack_pushes: int
    immediate_len: int = 0

    @property
    def is_push(self) -> bool:
        return self.immediate_len > 0 or self.mnemonic == "PUSH0"

    def __str__(self) -> str:
        return self.mnemonic


_BASE: dict[int, tuple[str, int, int]] = {
    0x00: ("STOP", 0, 0),
    0x01: ("ADD", 2, 1),
    0x02: ("MUL", 2, 1),
    0x03: ("SUB", 2, 1),
    0x04: ("DIV", 2, 1),
    0x05: ("SDIV", 2, 1),
    0x06: ("MOD", 2, 1),
    0x07: ("SMOD", 2, 1),
    0x08: ("ADDMOD", 3, 1),
    0x09: ("MULMOD", 3, 1),
    0x0A: ("EXP", 2, 1),
    0x0B: ("SIGNEXTEND", 2, 1),
    0x10: ("LT", 2, 1),
    0x11: ("GT", 2, 1),
    0x12: ("SLT", 2, 1),
    0x13: ("SGT", 2, 1),
    0x14: ("EQ", 2, 1),
    0x15: ("ISZERO", 1, 1),
    0x16: ("AND", 2, 1),
    0x17: ("OR", 2, 1),
    0x18: ("XOR", 2, 1),
    0x19: ("NOT", 1, 1),
    0x1A: ("BYTE", 2, 1),
    0x1B: ("SHL", 2, 1),
    0x1C: ("SHR", 2, 1),
    0x1D: ("SAR", 2, 1),
    0x20: ("SHA3", 2, 1),
    0x30: ("ADDRESS", 0, 1),
    0x31: ("BALANCE", 1, 1),
    0x32: ("ORIGIN", 0, 1),
    0x33: ("CALLER", 0, 1),
    0x34: ("CALLVALUE", 0, 1),
    0x35: ("CALLDATALOAD", 1, 1),
    0x36: ("CALLDATASIZE", 0, 1),
    0x37: ("CALLDATACOPY", 3, 0),
    0x38: ("CODESIZE", 0, 1),
    0x39: ("CODECOPY", 3, 0),
    0x3A: ("GASPRICE", 0, 1),
    0x3B: ("EXTCODESIZE", 1, 1),
    0x3C: ("EXTCODECOPY", 4, 0),
    0x3D: ("RETURNDATASIZE", 0, 1),
    0x3E: ("RETURNDATACOPY", 3, 0),
    0x3F: ("EXTCODEHASH", 1, 1),
    0x40: ("BLOCKHASH", 1, 1),
    0x41: ("COINBASE", 0, 1),
    0x42: ("TIMESTAMP", 0, 1),
    0x43: ("NUMBER", 0, 1),
    0x44: ("PREVRANDAO", 0, 1),
    0x45: ("GASLIMIT", 0, 1),
    0x46: ("CHAINID", 0, 1),
    0x47: ("SELFBALANCE", 0, 1),
    0x48: ("BASEFEE", 0, 1),
    0x50: ("POP", 1, 0),
    0x51: ("MLOAD", 1, 1),
    0x52: ("MSTORE", 2, 0),
    0x53: ("MSTORE8", 2, 0),
    0x54: ("SLOAD", 1, 1),
    0x55: ("SSTORE", 2, 0),
    0x56: ("JUMP", 1, 0),
    0x57: ("JUMPI", 2, 0),
    0x58: ("PC", 0, 1),
    0x59: ("MSIZE", 0, 1),
    0x5A: ("GAS", 0, 1),
    0x5B: ("JUMPDEST", 0, 0),
    0x5F: ("PUSH0", 0, 1),
    0xF0: ("CREATE", 3, 1),
    0xF1: ("CALL", 7, 1),
    0xF2: ("CALLCODE", 7, 1),
    0xF3: ("RETURN", 2, 0),
    0xF4: ("DELEGATECALL", 6, 1),
    0xF5: ("CREATE2", 4, 1),
    0xFA: ("STATICCALL", 6, 1),
    0xFD: ("REVERT", 2, 0),
    0xFE: ("INVALID", 0, 0),
    0xFF: ("SELFDESTRUCT", 1, 0),
}


def _build_table(push0: bool) -> tuple[Opcode, ...]:
    table: list[Opcode] = []
    for v in range(256):
        if v in _BASE and (push0 or v != 0x5F):
            name, pops, pushes = _BASE[v]
            table.append(Opcode(v, name, pops, pushes))
        elif 0x60 <= v <= 0x7F:
            n = v - 0x5F
            table.append(Opcode(v, f"PUSH{n}", 0, 1, n))
        elif 0x80 <= v <= 0x8F:
            n = v - 0x7F
            table.append(Opcode(v, f"DUP{n}", n, n + 1))
        elif 0x90 <= v <= 0x9F:
            n = v - 0x8F
            table.append(Opcode(v, f"SWAP{n}", n + 1, n + 1))
        elif 0xA0 <= v <= 0xA4:
            n = v - 0xA0
            table.append(Opcode(v, f"LOG{n}", n + 2, 0))
        else:
            table.append(Opcode(v, "INVALID", 0, 0))
    return tuple(table)


OPCODES: tuple[Opcode, ...] = _build_table(push0=True)
OPCODES_NO_PUSH0: tuple[Opcode, ...] = _build_table(push0=False)

BY_NAME: dict[str, Opcode] = {}
for _op in OPCODES:
    if _op.mnemonic != "INVALID" or _op.value == 0xFE:
        BY_NAME.setdefault(_op.mnemonic, _op)

INVALID = OPCODES[0xFE]

# opcodes that end a basic block
TERMINATORS = frozenset({"JUMP", "JUMPI", "STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})
HALTS = frozenset({"STOP", "RETURN", "REVERT", "INVALID", "SELFDESTRUCT"})


def op(name: str) -> Opcode:
    """Look up an opcode by mnemonic."""
    return BY_NAME[name.upper()]
