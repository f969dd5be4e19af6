import dataclasses
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from skanf.bytecode import disassemble
from skanf.cfg import (
    Edge,
    build_cfg,
    call_sites,
    code_coverage,
    identify_indirect_jumps,
    reachable_blocks,
)
from skanf.deobfuscator import deobfuscate
from skanf.evm.interpreter import Tx, execute_transaction
from skanf.fixtures.asm import Asm
from skanf.fixtures.generator import (
    BOT,
    fixture_world,
    multi_call_fixture,
    named,
    random_fixtures,
)


def test_straight_line():
    cfg = build_cfg(disassemble(bytes.fromhex("6001600201")))
    assert len(cfg.blocks) == 1 and cfg.edges == []
    assert reachable_blocks(cfg) == {0}
    assert code_coverage(cfg.program, cfg) == 1.0


def test_constant_jump_edge():
    # PUSH2 0x0005; JUMP; INVALID; JUMPDEST; STOP
    p = disassemble(bytes.fromhex("61000556FE5B00"))
    cfg = build_cfg(p)
    dst = cfg.block_at_pc(5).id
    assert Edge(0, dst, "jump") in cfg.edges
    assert identify_indirect_jumps(p) == []


def test_diamond_reaches_all():
    a = Asm()
    a.push(0, 1).op("CALLDATALOAD").push_label("right").op("JUMPI")
    a.push_label("join").op("JUMP")
    a.label("right").push_label("join").op("JUMP")
    a.label("join").op("STOP")
    code, _ = a.assemble()
    cfg = build_cfg(disassemble(code))
    assert len(cfg.blocks) == 4
    assert reachable_blocks(cfg) == {b.id for b in cfg.blocks}


def test_storage_dependent_jump():
    # PUSH1 0; SLOAD; JUMP; JUMPDEST; STOP
    p = disassemble(bytes.fromhex("600054565B00"))
    js = identify_indirect_jumps(p)
    assert [j.jump_pc for j in js] == [3]


def test_destroyer_single_indirect_jump(destroyer):
    code, gt, *_ = destroyer
    p = disassemble(code)
    js = identify_indirect_jumps(p)
    assert [j.jump_pc for j in js] == gt.indirect_jumps
    assert call_sites(p) == [gt.call_pc]


def test_call_sites():
    assert call_sites(disassemble(bytes.fromhex("6001600201"))) == []
    code, labels = multi_call_fixture()
    p = disassemble(code)
    by_grep = [i.pc for i in p.instructions if i.name == "CALL"]
    assert call_sites(p) == by_grep == [labels["call0"], labels["call1"]]


def test_handler_hidden_before_deobfuscation(destroyer):
    code, gt, ip, world = destroyer
    p = disassemble(code)
    before = build_cfg(p)
    handler = before.block_at_pc(gt.handler_pc).id
    assert handler not in reachable_blocks(before)
    # dynamically the handler is reached by exactly the recorded dispatch value
    assert gt.dispatch_values == [gt.handler_pc]
    after = build_cfg(ip)
    ids = {after.block_at_pc(gt.handler_pc).id, after.block_at_pc(gt.call_pc).id}
    assert ids <= reachable_blocks(after)


def test_coverage_examples(destroyer):
    code, gt, ip, _ = destroyer
    assert code_coverage(disassemble(code)) < 0.5
    assert code_coverage(ip) == 1.0
    dcode, dgt = named("dead-block")
    dip = deobfuscate(disassemble(dcode))
    cfg = build_cfg(dip)
    assert code_coverage(dip, cfg) == (len(cfg.blocks) - dgt.spec.dead_blocks) / len(cfg.blocks) < 1.0


def test_instrumented_output_has_no_indirect_jumps(destroyer):
    *_, ip, _ = destroyer
    assert identify_indirect_jumps(ip) == []


def test_exports(destroyer):
    *_, ip, _ = destroyer
    cfg = build_cfg(ip)
    assert len(cfg.edge_list().splitlines()) == len(cfg.edges)
    dot = cfg.to_dot()
    assert dot.startswith("digraph") and dot.count("->") == len(cfg.edges)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 19), st.lists(st.tuples(st.integers(0, 400), st.integers(0, 400)), max_size=8))
def test_adding_edges_never_lowers_coverage(k, extra):
    code, _ = random_fixtures(20, seed=3)[k]
    cfg = build_cfg(disassemble(code))
    n = len(cfg.blocks)
    more = dataclasses.replace(cfg, edges=cfg.edges + [Edge(a % n, b % n, "jump") for a, b in extra])
    assert reachable_blocks(cfg) <= reachable_blocks(more)
    assert code_coverage(cfg.program, cfg) <= code_coverage(more.program, more)


def test_indirect_set_is_sound_on_random_runs():
    """Jumps outside the set land where the CFG's constant says."""
    rng = random.Random(5)
    for code, gt in random_fixtures(15, seed=11):
        p = disassemble(code)
        cfg = build_cfg(p)
        indirect = {j.jump_pc for j in identify_indirect_jumps(p, cfg)}
        world = fixture_world(gt)
        for _ in range(20):
            data = gt.calldata(length=128) if rng.random() < 0.5 else rng.randbytes(rng.randrange(129))
            r = execute_transaction(world.clone(), Tx(gt.sender(), BOT, 0, data))
            steps = [s for s in r.trace if s.depth == 0]
            for s, nxt in zip(steps, steps[1:]):
                if s.op not in ("JUMP", "JUMPI") or s.pc in indirect:
                    continue
                static = cfg.jump_operands[p.index[s.pc]]
                assert nxt.pc in (static.value, s.pc + 1)
