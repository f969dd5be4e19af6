import random

import pytest

from skanf.bytecode import disassemble
from skanf.deobfuscator import (
    GADGET_STRIDE,
    MIN_VIRTUAL_PC,
    TABLE_BASE,
    DeobfuscationError,
    build_branch_table,
    deobfuscate,
    instrument,
    rewrite_jump,
)
from skanf.evm.interpreter import Tx, execute_transaction
from skanf.evm.state import WorldState
from skanf.fixtures.asm import Asm
from skanf.fixtures.generator import BOT, fixture_world, random_fixtures
from skanf.symbolic.engine import SeedInput, concolic_machine

ME = 0xAB


def test_table_two_entries():
    t = build_branch_table({0x0A00, 0x0B00})
    assert t.base_pc == TABLE_BASE and len(t.entries) == 2
    eq = next(i for i in t.instructions if i.name == "EQ")
    assert eq.pc == 0xE005
    first = t.instructions[1:6]
    assert [i.name for i in first] == ["DUP1", "PUSH2", "EQ", "PUSH2", "JUMPI"]
    assert first[1].arg == 0x0A00
    assert t.instructions[-1].name == "INVALID"
    g = t.gadgets[:4]
    assert [i.name for i in g] == ["JUMPDEST", "POP", "PUSH2", "JUMP"]
    assert g[0].pc == 0xF000 and t.entries[1].gadget_pc == 0xF000 + GADGET_STRIDE


def test_table_singleton_and_empty():
    t = build_branch_table({5})
    assert len(t.entries) == 1 and len(t.gadgets) == 4
    with pytest.raises(DeobfuscationError):
        build_branch_table(set())


def test_table_300_entries_ascending():
    dests = random.Random(0).sample(range(1, 0x6000), 300)
    t = build_branch_table(dests)
    assert [e.dest for e in t.entries] == sorted(dests)
    pcs = [i.pc for i in t.instructions + t.gadgets]
    assert min(pcs) >= MIN_VIRTUAL_PC and len(set(pcs)) == len(pcs)


def test_large_table_widens_gadget_base():
    t = build_branch_table(range(1, 1200))
    table_end = t.instructions[-1].pc
    assert t.gadget_base > table_end and t.gadget_base > 0xF000


def _jumpi_program() -> bytes:
    """Marker 0xab on the stack, then a JUMPI whose destination comes from calldata."""
    a = Asm()
    a.push(ME, 1)
    a.push(0x20, 1).op("CALLDATALOAD")
    a.push(0, 1).op("CALLDATALOAD").push(0xF0, 1).op("SHR")
    a.op("JUMPI")
    a.push(0, 1).op("MSTORE").push(0x20, 1).push(0, 1).op("RETURN")
    a.pad_to(0x0B00).label("taken")
    a.push(0x01, 1).op("ADD").push(0, 1).op("MSTORE").push(0x20, 1).push(0, 1).op("RETURN")
    code, _ = a.assemble()
    return code


def _run(program, data: bytes):
    w = WorldState()
    w.set_code(BOT, program.code)
    if not hasattr(program, "jumpdests"):
        w.override_executable(BOT, program)
    return execute_transaction(w, Tx(1, BOT, 0, data))


@pytest.mark.parametrize("cond,dest", [(0, 0x0B00), (1, 0x0B00), (1, 0x0B01), (0, 0x1234)])
def test_jumpi_rewrite_matches_original(cond, dest):
    p = disassemble(_jumpi_program())
    ip = deobfuscate(p)
    assert [r.kind for r in ip.rewrites.values()] == ["JUMPI"]
    data = dest.to_bytes(2, "big").ljust(32, b"\0") + cond.to_bytes(32, "big")
    a, b = _run(p, data), _run(ip, data)
    assert (a.status, a.return_data) == (b.status, b.return_data)
    if cond == 0:
        # the leftover destination was popped: the marker is on top again
        assert int.from_bytes(b.return_data, "big") == ME
    elif dest == 0x0B00:
        assert int.from_bytes(b.return_data, "big") == ME + 1
    else:
        assert a.status == b.status == "fault"


def test_rewrite_rejects_direct_jump():
    p = disassemble(bytes.fromhex("61000556FE5B00"))
    t = build_branch_table(p.jumpdests)
    with pytest.raises(DeobfuscationError):
        rewrite_jump(p, 3, t, indirect=set())


def test_table_walk_lands_on_handler(destroyer):
    _, gt, ip, world = destroyer
    w = world.clone()
    w.override_executable(BOT, ip)
    r = execute_transaction(w, Tx(gt.sender(), BOT, 0, gt.calldata(length=0x100)))
    assert r.success
    pcs = [s.pc for s in r.trace if s.depth == 0]
    i = pcs.index(TABLE_BASE)
    gadget = ip.table.entries[[e.dest for e in ip.table.entries].index(gt.handler_pc)].gadget_pc
    j = pcs.index(gadget, i)
    assert pcs[j + 4] == gt.handler_pc


def test_not_obfuscated_is_identity():
    p = disassemble(bytes.fromhex("61000556FE5B00"))
    ip = instrument(p)
    assert not ip.obfuscated and ip.instructions == p.instructions and ip.table is None


def test_original_bytes_untouched(destroyer):
    code, _, ip, _ = destroyer
    orig = [i for i in ip.instructions[: ip.code_end] if i.pc is not None]
    assert b"".join(i.encode() for i in orig) == code
    assert set(ip.rewrites) == {j.jump_pc for j in ip.indirect_jumps}


def test_listing_marks_injected(destroyer):
    *_, ip, _ = destroyer
    text = ip.listing()
    assert "; --- branch table ---" in text and "; --- gadgets ---" in text
    assert "0xe005  EQ" in text
    assert "rewritten indirect jump" in text


def test_stack_heights_agree_on_original_pcs(rng):
    for code, gt in random_fixtures(10, seed=21):
        p = disassemble(code)
        ip = deobfuscate(p)
        world = fixture_world(gt)
        for _ in range(8):
            data = gt.calldata(length=128) if rng.random() < 0.6 else rng.randbytes(128)
            seed = SeedInput(gt.sender(), gt.sender(), data, 0, 0, BOT)
            heights = []
            for prog in (p, ip):
                m = concolic_machine(prog, seed, world, address=BOT)
                seen = []
                m.check = lambda m, seen=seen: seen.append((m.pc, len(m.stack)))
                m.run()
                # the rewritten jump's own operand is replaced by design
                heights.append([h for h in seen if h[0] is not None and h[0] < MIN_VIRTUAL_PC
                                and h[0] not in ip.rewrites])
            assert heights[0] and heights[0] == heights[1]
