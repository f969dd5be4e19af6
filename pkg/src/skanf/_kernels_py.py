"""Pure-Python versions of the hot kernels.

These mirror ``_kernels.pyx`` exactly and are used when the compiled
extension is unavailable (or ``SKANF_PURE_PYTHON=1`` is set).
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

_RC = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# rotation offsets indexed by lane x + 5*y
_ROT = (
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
)

_RATE = 136


def _keccak_f(a: list[int]) -> None:
    for rc in _RC:
        c = [a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20] for x in range(5)]
        d = [c[(x - 1) % 5] ^ (((c[(x + 1) % 5] << 1) | (c[(x + 1) % 5] >> 63)) & _MASK64) for x in range(5)]
        for i in range(25):
            a[i] ^= d[i % 5]
        b = [0] * 25
        for x in range(5):
            for y in range(5):
                i = x + 5 * y
                r = _ROT[i]
                v = a[i]
                if r:
                    v = ((v << r) | (v >> (64 - r))) & _MASK64
                b[y + 5 * ((2 * x + 3 * y) % 5)] = v
        for y in range(0, 25, 5):
            b0, b1, b2, b3, b4 = b[y], b[y + 1], b[y + 2], b[y + 3], b[y + 4]
            a[y] = b0 ^ (~b1 & b2)
            a[y + 1] = b1 ^ (~b2 & b3)
            a[y + 2] = b2 ^ (~b3 & b4)
            a[y + 3] = b3 ^ (~b4 & b0)
            a[y + 4] = b4 ^ (~b0 & b1)
        a[0] ^= rc


def keccak256(data: bytes) -> bytes:
    """Original Keccak-256 (the Ethereum variant, 0x01 padding)."""
    msg = bytearray(data)
    msg.append(0x01)
    msg.extend(b"\x00" * ((-len(msg)) % _RATE))
    msg[-1] |= 0x80
    state = [0] * 25
    for off in range(0, len(msg), _RATE):
        block = msg[off:off + _RATE]
        for i in range(_RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        _keccak_f(state)
    return b"".join(state[i].to_bytes(8, "little") for i in range(4))


def scan_code(code: bytes) -> tuple[list[int], list[int]]:
    """Return (instruction start offsets, JUMPDEST offsets) of ``code``."""
    starts: list[int] = []
    jumpdests: list[int] = []
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        starts.append(i)
        if op == 0x5B:
            jumpdests.append(i)
            i += 1
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5E
        else:
            i += 1
    return starts, jumpdests
