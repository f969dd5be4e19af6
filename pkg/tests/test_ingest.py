import json

import pytest

from skanf.evm.interpreter import Tx
from skanf.fixtures.bundles import BLOCK, bundle_path
from skanf.fixtures.generator import BOT, OWNER, WETH
from skanf.ingest import (
    FileProvider,
    FixtureError,
    TransactionRecord,
    load_fixture,
    normalize,
    parse_fixture,
    replay,
    seed_calls,
    serialize,
)


def test_empty_fixture(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    assert load_fixture(p) == ([], {})


def test_bundle_loads():
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    assert len(records) == 3 and list(snaps) == [BLOCK] == [20_000_000]
    assert records[0].sender == OWNER and records[0].to == BOT
    assert [r.status for r in records] == ["success", "success", "fail"]
    assert snaps[BLOCK].block.number == BLOCK


def test_missing_snapshot_names_block():
    doc = json.loads(bundle_path("destroyer-inu").read_text())
    doc["transactions"][0]["blockNumber"] = 123
    with pytest.raises(FixtureError, match="no snapshot for block 123"):
        parse_fixture(doc)


def test_json_error_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "snapshots": {,\n}')
    with pytest.raises(FixtureError, match=r"line 2 column 17"):
        load_fixture(p)


def test_schema_error_names_field():
    doc = json.loads(bundle_path("destroyer-inu").read_text())
    doc["transactions"][1]["status"] = "maybe"
    with pytest.raises(FixtureError, match="transactions/1/status"):
        parse_fixture(doc)


def test_replay_agrees_with_records():
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    for r in records:
        rep = replay(r, snaps[r.block_number])
        assert not rep.divergent, rep.reason


def test_tampered_status_diverges():
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    r = records[2]
    r.status = "success"
    rep = replay(r, snaps[BLOCK])
    assert rep.divergent and "status" in rep.reason


def test_tampered_logs_diverge():
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    r = records[0]
    r.logs = r.logs[:-1] if len(r.logs) > 1 else [r.logs[0].__class__(WETH, (), b"")]
    assert replay(r, snaps[BLOCK]).divergent


def test_delegatecall_is_unsupported():
    _, snaps = load_fixture(bundle_path("destroyer-inu"))
    w = snaps[BLOCK].clone()
    target = 0xDE1E
    # DELEGATECALL(gas, addr, 0, 0, 0, 0)
    w.set_code(target, bytes.fromhex("6000600060006000") + bytes.fromhex("61") + BOT.to_bytes(20, "big")[-2:]
               + bytes.fromhex("5af400"))
    rep = replay(TransactionRecord("0x01", OWNER, target, b"", BLOCK, "success"), w)
    assert rep.divergent and "unsupported" in rep.reason


def test_serialize_normalizes():
    doc = json.loads(bundle_path("destroyer-inu").read_text())
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    assert serialize(records, snaps, doc["name"], BOT) == normalize(doc)
    assert normalize(normalize(doc)) == normalize(doc)


def test_internal_calls_reconstructed():
    records, snaps = load_fixture(bundle_path("destroyer-inu"))
    rep = replay(records[0], snaps[BLOCK])
    assert [c.callee for c in rep.internal_calls] == [WETH]
    assert [c.callee for c in seed_calls(rep, BOT)] == [BOT]
    assert seed_calls(rep, WETH)[0].caller == BOT


def test_record_tx_round_trip():
    records, _ = load_fixture(bundle_path("destroyer-inu"))
    r = records[0]
    assert TransactionRecord.from_json(r.to_json()) == r
    assert r.tx() == Tx(OWNER, BOT, 0, r.calldata) and r.origin == OWNER


def test_file_provider():
    fp = FileProvider(bundle_path("destroyer-inu"))
    assert fp.contract == BOT
    assert len(fp.transactions(BOT)) == 2
    assert len(fp.transactions(WETH)) == 2
    assert len(fp.transactions(BOT, limit=1)) == 1
    assert fp.snapshot(BLOCK) is not fp.snapshots[BLOCK] and fp.snapshot(1) is None
