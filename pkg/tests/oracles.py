"""Independent oracles shared by the unit and acceptance tests.

Dependence is measured by brute force: change one calldata byte, re-execute
concretely, and see which CALL parameters change.
"""

from __future__ import annotations

import random

from skanf.bytecode import disassemble
from skanf.evm.interpreter import Tx, execute_transaction
from skanf.evm.state import WorldState
from skanf.fixtures.asm import Asm
from skanf.symbolic.engine import SeedInput, concolic_run
from skanf.taint import calldata_labels

HOST = 0xC0DE000000000000000000000000000000000001
SENDER = 0x5E4D000000000000000000000000000000000002
ROLES = ("target", "value", "selector", "arg1", "arg2")

BINARY = ["ADD", "SUB", "MUL", "DIV", "MOD", "AND", "OR", "XOR", "SHL", "SHR", "SAR", "BYTE", "LT", "GT", "EQ",
          "EXP", "SIGNEXTEND"]
UNARY = ["NOT", "ISZERO"]


def _world(code: bytes) -> WorldState:
    w = WorldState()
    w.set_code(HOST, code)
    return w


def sink_values(code: bytes, calldata: bytes) -> dict[str, int] | None:
    """Concrete CALL parameters of the first CALL made by the host, or None."""
    r = execute_transaction(_world(code), Tx(SENDER, HOST, 0, calldata), record_trace=False)
    call = next((c for c in r.calls if c.depth == 1 and c.caller == HOST), None)
    if call is None:
        return None
    out = {"target": call.callee, "value": call.value}
    data = call.calldata
    if len(data) >= 4:
        out["selector"] = int.from_bytes(data[:4], "big")
        for k in range((len(data) - 4 + 31) // 32):
            w = data[4 + 32 * k:36 + 32 * k].ljust(32, b"\0")
            out[f"arg{k + 1}"] = int.from_bytes(w, "big")
    return out


def flip_dependence(code: bytes, calldata: bytes, values=range(256)) -> dict[str, set[int]]:
    """Per parameter, the calldata bytes whose change alters it (same path only)."""
    base = sink_values(code, calldata)
    assert base is not None, "sink not reached on the base input"
    deps: dict[str, set[int]] = {k: set() for k in base}
    for i in range(len(calldata)):
        for v in values:
            if v == calldata[i]:
                continue
            d = bytearray(calldata)
            d[i] = v
            got = sink_values(code, bytes(d))
            if got is None:
                continue
            for k, x in base.items():
                if got.get(k) != x:
                    deps[k].add(i)
    return deps


def engine_labels(code: bytes, calldata: bytes) -> dict[str, set[int]]:
    seed = SeedInput(SENDER, SENDER, calldata, 0, 0, HOST)
    paths = concolic_run(disassemble(code), seed, _world(code), address=HOST)
    assert paths, paths.reason
    return {p.role: {int(x) for x in calldata_labels(p.labels)} for p in paths[0].analysis.params}


# --- micro-programs --------------------------------------------------------------


def _expr(a: Asm, rng: random.Random, depth: int, n: int) -> None:
    r = rng.random()
    if depth == 0 or r < 0.3:
        leaf = rng.random()
        if leaf < 0.7:
            a.push(rng.randrange(n), 1).op("CALLDATALOAD")
        elif leaf < 0.8:
            a.push(rng.choice([0, 0x20]), 1).op("MLOAD")
        else:
            a.push(rng.choice([0, 1, 8, 0x60, 0xFF, 0xF0, rng.randrange(256)]), 1)
        return
    if r < 0.45:
        _expr(a, rng, depth - 1, n)
        a.op(rng.choice(UNARY))
        return
    _expr(a, rng, depth - 1, n)
    _expr(a, rng, depth - 1, n)
    a.op(rng.choice(BINARY))


def micro_program(rng: random.Random, n: int = 3, limit: int = 64) -> bytes:
    """Straight-line program ending in one CALL; at most ``limit`` bytes."""
    while True:
        a = Asm()
        for _ in range(rng.randrange(1, 3)):
            kind = rng.random()
            if kind < 0.45:
                _expr(a, rng, 2, n)
                a.push(rng.choice([0, 0x20, 0x24]), 1).op("MSTORE")
            elif kind < 0.75:
                _expr(a, rng, 2, n)
                a.push(rng.randrange(0x44), 1).op("MSTORE8")
            else:
                a.push(rng.randrange(1, n + 1), 1).push(rng.randrange(n), 1).push(rng.randrange(0x44), 1)
                a.op("CALLDATACOPY")
        a.push(0, 1).push(0, 1).push(rng.choice([0x24, 0x44]), 1).push(rng.choice([0, 0x1C]), 1)
        if rng.random() < 0.3:
            _expr(a, rng, 1, n)
        else:
            a.push(0, 1)
        _expr(a, rng, 2, n)
        a.op("GAS", "CALL", "STOP")
        code, _ = a.assemble()
        if len(code) <= limit:
            return code


# --- curated precision suite --------------------------------------------------------


def _call(a: Asm) -> None:
    # retLen, retOff, inLen, inOff, value; target and gas come next
    a.push(0, 1).push(0, 1).push(0x44, 1).push(0, 1).push(0, 1)


def precision_suite() -> list[tuple[str, bytes, bytes]]:
    """(name, code, base calldata) where taint and dependence should coincide."""
    rng = random.Random(99)
    sel = (0xA9059CBB << 224)
    cases = []

    def finish(a: Asm, target_ops) -> bytes:
        target_ops(a)
        a.op("GAS", "CALL", "STOP")
        return a.assemble()[0]

    def const_target(a: Asm) -> None:
        a.push(0xC02AAA39B223FE8D0A0E5C4F27EAD9083C756CC2, 20)

    # 1. target straight from calldata word 0 (only its low 20 bytes matter)
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    _call(a)
    cases.append(("target-word", finish(a, lambda a: a.push(0, 1).op("CALLDATALOAD")), rng.randbytes(32)))
    # 2. target masked out of a word loaded at offset 4
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    _call(a)
    cases.append(("target-mask", finish(a, lambda a: a.push((1 << 160) - 1, 20).push(4, 1).op("CALLDATALOAD", "AND")),
                  rng.randbytes(40)))
    # 3. amount = calldata word XOR constant
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    a.push(0x5A5A << 200, 32).push(0, 1).op("CALLDATALOAD", "XOR").push(0x24, 1).op("MSTORE")
    _call(a)
    cases.append(("amount-xor", finish(a, const_target), rng.randbytes(32)))
    # 4. all constant
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE").push(7, 1).push(0x24, 1).op("MSTORE")
    _call(a)
    cases.append(("all-constant", finish(a, const_target), rng.randbytes(8)))
    # 5. one calldata byte written with MSTORE8 into the recipient word
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    a.push(0, 1).op("CALLDATALOAD").push(0xF8, 1).op("SHR").push(0x23, 1).op("MSTORE8")
    _call(a)
    cases.append(("recipient-byte", finish(a, const_target), rng.randbytes(1)))
    # 6. CALLDATACOPY of the whole argument region
    a = Asm().push(0x44, 1).push(0, 1).push(0, 1).op("CALLDATACOPY")
    _call(a)
    cases.append(("copy-args", finish(a, const_target), bytes.fromhex("a9059cbb") + rng.randbytes(64)))
    # 7. OR of two byte-disjoint masked words
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    a.push(0xFF, 1).push(0, 1).op("CALLDATALOAD", "AND")
    a.push(0xFF << 248, 32).push(0, 1).op("CALLDATALOAD", "AND", "OR").push(0x24, 1).op("MSTORE")
    _call(a)
    cases.append(("amount-or-masks", finish(a, const_target), rng.randbytes(32)))
    # 8. recipient is the caller: no calldata dependence at all
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE").op("CALLER").push(4, 1).op("MSTORE")
    _call(a)
    cases.append(("recipient-caller", finish(a, const_target), rng.randbytes(4)))
    # 9. amount = word + constant
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    a.push(12345, 2).push(0, 1).op("CALLDATALOAD", "ADD").push(0x24, 1).op("MSTORE")
    _call(a)
    cases.append(("amount-add", finish(a, const_target), rng.randbytes(32)))
    # 10. two-byte dispatch-style read: shr(0xf0, calldataload(k)) with exactly k+2 bytes
    a = Asm().push(sel, 32).push(0, 1).op("MSTORE")
    a.push(4, 1).op("CALLDATALOAD").push(0xF0, 1).op("SHR").push(0x24, 1).op("MSTORE")
    _call(a)
    cases.append(("amount-shr", finish(a, const_target), rng.randbytes(6)))
    return cases


FLIP_VALUES = (0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0xFF, 0x5A)
