"""256-bit word arithmetic shared by the concrete and symbolic interpreters."""

from __future__ import annotations

from collections.abc import Callable

from .kernels import keccak256

UINT_MAX = (1 << 256) - 1
SIGN_BIT = 1 << 255
ADDRESS_MASK = (1 << 160) - 1


def to_signed(x: int) -> int:
    return x - (1 << 256) if x & SIGN_BIT else x


def to_unsigned(x: int) -> int:
    return x & UINT_MAX


def sdiv(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = to_signed(a), to_signed(b)
    q = abs(sa) // abs(sb)
    return to_unsigned(-q if (sa < 0) != (sb < 0) else q)


def smod(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = to_signed(a), to_signed(b)
    r = abs(sa) % abs(sb)
    return to_unsigned(-r if sa < 0 else r)


def signextend(b: int, x: int) -> int:
    if b >= 31:
        return x
    bits = 8 * (b + 1)
    sign = 1 << (bits - 1)
    x &= (1 << bits) - 1
    return to_unsigned(x - (1 << bits)) if x & sign else x


def byte_of(i: int, x: int) -> int:
    return (x >> (8 * (31 - i))) & 0xFF if i < 32 else 0


def sar(shift: int, x: int) -> int:
    if shift >= 256:
        return UINT_MAX if x & SIGN_BIT else 0
    return to_unsigned(to_signed(x) >> shift)


def keccak_int(data: bytes) -> int:
    return int.from_bytes(keccak256(data), "big")


# binary/unary/ternary ops keyed by mnemonic; operand order is EVM stack order
# (first argument = top of stack)
BINARY: dict[str, Callable[[int, int], int]] = {
    "ADD": lambda a, b: (a + b) & UINT_MAX,
    "MUL": lambda a, b: (a * b) & UINT_MAX,
    "SUB": lambda a, b: (a - b) & UINT_MAX,
    "DIV": lambda a, b: a // b if b else 0,
    "SDIV": sdiv,
    "MOD": lambda a, b: a % b if b else 0,
    "SMOD": smod,
    "EXP": lambda a, b: pow(a, b, 1 << 256),
    "SIGNEXTEND": signextend,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "SLT": lambda a, b: int(to_signed(a) < to_signed(b)),
    "SGT": lambda a, b: int(to_signed(a) > to_signed(b)),
    "EQ": lambda a, b: int(a == b),
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "BYTE": byte_of,
    "SHL": lambda s, x: (x << s) & UINT_MAX if s < 256 else 0,
    "SHR": lambda s, x: x >> s if s < 256 else 0,
    "SAR": sar,
}

UNARY: dict[str, Callable[[int], int]] = {
    "ISZERO": lambda a: int(a == 0),
    "NOT": lambda a: a ^ UINT_MAX,
}

TERNARY: dict[str, Callable[[int, int, int], int]] = {
    "ADDMOD": lambda a, b, n: (a + b) % n if n else 0,
    "MULMOD": lambda a, b, n: (a * b) % n if n else 0,
}


def selector(signature: str) -> int:
    """4-byte function selector of a Solidity signature."""
    return int.from_bytes(keccak256(signature.encode())[:4], "big")


def event_topic(signature: str) -> int:
    return keccak_int(signature.encode())


TRANSFER_SELECTOR = 0xA9059CBB
APPROVE_SELECTOR = 0x095EA7B3
TRANSFER_FROM_SELECTOR = 0x23B872DD
BALANCE_OF_SELECTOR = 0x70A08231
ALLOWANCE_SELECTOR = 0xDD62ED3E
TRANSFER_TOPIC = event_topic("Transfer(address,address,uint256)")
APPROVAL_TOPIC = event_topic("Approval(address,address,uint256)")


def hex_addr(a: int) -> str:
    return "0x" + format(a & ADDRESS_MASK, "040x")


def parse_int(v: int | str) -> int:
    """Accept ints, decimal strings and 0x-hex strings."""
    if isinstance(v, int):
        return v
    v = v.strip()
    return int(v, 16) if v[:2].lower() == "0x" else int(v)
