import json

import pytest

from skanf.bytecode import disassemble
from skanf.cfg import identify_indirect_jumps
from skanf.fixtures.bundles import BUNDLES, data_dir, write_all
from skanf.fixtures.generator import (
    HANDLER_PC,
    NAMED_SPECS,
    canonical_spec,
    named,
    random_fixtures,
    self_check,
)


def test_checked_in_data_is_current(tmp_path):
    written = write_all(tmp_path)
    assert len(written) == len(BUNDLES) + 2 * len(NAMED_SPECS)
    for p in written:
        assert p.read_text() == (data_dir() / p.name).read_text(), p.name


@pytest.mark.parametrize("name", sorted(NAMED_SPECS))
def test_named_self_check(name):
    code, gt = named(name)
    hits = self_check(gt)
    assert hits == [gt.handler_pc]
    assert (len(gt.indirect_jumps) > 0) == (gt.spec.dispatch_width > 0)
    assert {j.jump_pc for j in identify_indirect_jumps(disassemble(code))} == set(gt.indirect_jumps)


def test_random_exhaustive_dispatch():
    for code, gt in random_fixtures(12, seed=7):
        hits = self_check(gt, exhaustive=gt.spec.dispatch_width == 1)
        assert hits == [gt.handler_pc], gt.spec.name
        assert gt.dispatch_values and gt.handler_pc in gt.dispatch_values
        assert bool(gt.indirect_jumps) == (gt.spec.dispatch_width > 0)


@pytest.mark.slow
def test_destroyer_exhaustive_two_byte_dispatch():
    _, gt = named("destroyer-inu")
    assert self_check(gt, exhaustive=True) == [HANDLER_PC]


def test_random_fixtures_deterministic():
    a = [c for c, _ in random_fixtures(5, seed=3)]
    b = [c for c, _ in random_fixtures(5, seed=3)]
    assert a == b and len(set(a)) == 5


def test_canonical_offsets():
    s = canonical_spec()
    sh = s.call_shape
    assert (s.dispatch_offset, s.dispatch_width, s.gate) == (0x84, 2, "origin")
    assert (sh.target_offset, sh.recipient_offset, sh.amount_offset) == (0x86, 0xA6, 0xC6)
    _, gt = named("destroyer-inu")
    data = gt.calldata(length=0x120)
    assert data[0x84:0x86] == b"\x0a\x00" and len(data) == 0x120
    assert gt.param_classes["target"] == "Controllable" and gt.vulnerable and gt.amount_controllable


def test_truth_json_shape():
    doc = json.loads((data_dir() / "destroyer-inu.truth.json").read_text())
    assert doc["callPC"] == hex(named("destroyer-inu")[1].call_pc)
    assert doc["handlerPC"] == "0xa00"
