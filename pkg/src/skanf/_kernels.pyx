# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels: Keccak-256 and the bytecode boundary scan."""

from libc.stdint cimport uint64_t
from libc.string cimport memset

cdef uint64_t RC[24]
RC[:] = [
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808AULL, 0x8000000080008000ULL,
    0x000000000000808BULL, 0x0000000080000001ULL, 0x8000000080008081ULL, 0x8000000000008009ULL,
    0x000000000000008AULL, 0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000AULL,
    0x000000008000808BULL, 0x800000000000008BULL, 0x8000000000008089ULL, 0x8000000000008003ULL,
    0x8000000000008002ULL, 0x8000000000000080ULL, 0x000000000000800AULL, 0x800000008000000AULL,
    0x8000000080008081ULL, 0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL,
]

cdef int ROT[25]
ROT[:] = [0, 1, 62, 28, 27, 36, 44, 6, 55, 20, 3, 10, 43, 25, 39, 41, 45, 15, 21, 8, 18, 2, 61, 56, 14]

cdef enum:
    RATE = 136


cdef inline uint64_t rotl(uint64_t v, int r) nogil:
    if r == 0:
        return v
    return (v << r) | (v >> (64 - r))


cdef void keccak_f(uint64_t* a) nogil:
    cdef uint64_t c[5]
    cdef uint64_t d[5]
    cdef uint64_t b[25]
    cdef int rnd, x, y, i
    for rnd in range(24):
        for x in range(5):
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20]
        for x in range(5):
            d[x] = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1)
        for i in range(25):
            a[i] ^= d[i % 5]
        for x in range(5):
            for y in range(5):
                i = x + 5 * y
                b[y + 5 * ((2 * x + 3 * y) % 5)] = rotl(a[i], ROT[i])
        for y in range(0, 25, 5):
            for x in range(5):
                a[y + x] = b[y + x] ^ ((~b[y + (x + 1) % 5]) & b[y + (x + 2) % 5])
        a[0] ^= RC[rnd]


def keccak256(data):
    """Original Keccak-256 (the Ethereum variant, 0x01 padding)."""
    cdef const unsigned char[:] view = bytes(data)
    cdef Py_ssize_t n = view.shape[0]
    cdef uint64_t state[25]
    cdef unsigned char block[RATE]
    cdef Py_ssize_t off = 0, i, take
    cdef int lane, k
    cdef uint64_t w
    memset(state, 0, sizeof(state))
    while True:
        take = n - off
        if take > RATE:
            take = RATE
        memset(block, 0, RATE)
        for i in range(take):
            block[i] = view[off + i]
        if take < RATE:
            block[take] ^= 0x01
            block[RATE - 1] ^= 0x80
        for lane in range(RATE // 8):
            w = 0
            for k in range(8):
                w |= (<uint64_t>block[8 * lane + k]) << (8 * k)
            state[lane] ^= w
        keccak_f(state)
        off += take
        if take < RATE:
            break
    out = bytearray(32)
    for lane in range(4):
        w = state[lane]
        for k in range(8):
            out[8 * lane + k] = (w >> (8 * k)) & 0xFF
    return bytes(out)


def scan_code(code):
    """Return (instruction start offsets, JUMPDEST offsets) of ``code``."""
    cdef const unsigned char[:] view = bytes(code)
    cdef Py_ssize_t i = 0, n = view.shape[0]
    cdef unsigned char op
    starts = []
    jumpdests = []
    while i < n:
        op = view[i]
        starts.append(i)
        if op == 0x5B:
            jumpdests.append(i)
            i += 1
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5E
        else:
            i += 1
    return starts, jumpdests
