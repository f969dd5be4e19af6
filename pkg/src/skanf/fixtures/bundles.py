"""Transaction bundles for the named fixtures, and the checked-in data files.

Regenerate the files under ``fixtures/data`` with::

    python3 -m skanf.fixtures.bundles
"""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any

from ..evm.interpreter import Tx, execute_transaction
from ..evm.state import WorldState
from ..ingest import TransactionRecord, serialize
from ..words import TRANSFER_SELECTOR
from .generator import (
    BENIGN_RECIPIENT,
    BOT,
    NAMED_SPECS,
    OWNER,
    WETH,
    GroundTruth,
    fixture_world,
    named,
)

BLOCK = 20_000_000
OTHER = 0x5EED5EED5EED5EED5EED5EED5EED5EED5EED5EED


def _record(world: WorldState, h: str, tx: Tx) -> TransactionRecord:
    r = execute_transaction(world.clone(), tx, record_trace=False)
    return TransactionRecord(h, tx.sender, tx.to, tx.data, BLOCK, "success" if r.success else "fail",
                             tx.value, list(r.logs))


def _hash(name: str, i: int) -> str:
    from ..words import keccak_int

    return "0x" + format(keccak_int(f"{name}/{i}".encode()), "064x")


def bundle(name: str, with_transactions: bool = True) -> dict[str, Any]:
    """Fixture document for a named spec: one snapshot and up to three records.

    The records are a benign call of the bot moving tokens (the seed), a plain
    token transfer that never touches the bot, and an empty-calldata call
    of the bot.
    """
    _, gt = named(name)
    world = fixture_world(gt, block=BLOCK)
    records = []
    if with_transactions:
        records = _records(name, gt, world)
    return serialize(records, {BLOCK: world}, name=name if with_transactions else f"{name}-notx", contract=BOT)


def _records(name: str, gt: GroundTruth, world: WorldState) -> list[TransactionRecord]:
    sender = gt.sender()
    seed = gt.calldata(target=WETH, recipient=BENIGN_RECIPIENT, amount=10**18, length=0x120)
    direct = TRANSFER_SELECTOR.to_bytes(4, "big") + OTHER.to_bytes(32, "big") + (10**17).to_bytes(32, "big")
    return [
        _record(world, _hash(name, 0), Tx(sender, BOT, 0, seed)),
        _record(world, _hash(name, 1), Tx(OWNER, WETH, 0, direct)),
        _record(world, _hash(name, 2), Tx(sender, BOT, 0, b"")),
    ]


BUNDLES = {
    "destroyer-inu": ("destroyer-inu", True),
    "destroyer-inu-notx": ("destroyer-inu", False),
    "ungated-notx": ("ungated", False),
    "ungated": ("ungated", True),
    "fixed-amount-drain": ("fixed-amount-drain", True),
    "safe-constant": ("safe-constant", True),
    "keccak-guard": ("keccak-guard", True),
    "post-call-guard": ("post-call-guard", True),
    "approve": ("approve", True),
}


def data_dir() -> Path:
    return Path(str(resources.files("skanf.fixtures") / "data"))


def bundle_path(name: str) -> Path:
    return data_dir() / f"{name}.json"


def hex_path(name: str) -> Path:
    return data_dir() / f"{name}.hex"


def write_all(out: Path | None = None) -> list[Path]:
    out = out or data_dir()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (spec, txs) in BUNDLES.items():
        p = out / f"{name}.json"
        p.write_text(json.dumps(bundle(spec, txs), indent=2) + "\n")
        written.append(p)
    for name in NAMED_SPECS:
        code, gt = named(name)
        p = out / f"{name}.hex"
        p.write_text("0x" + code.hex() + "\n")
        g = out / f"{name}.truth.json"
        g.write_text(json.dumps(gt.to_json(), indent=2) + "\n")
        written += [p, g]
    return written


if __name__ == "__main__":
    for p in write_all(Path(sys.argv[1]) if len(sys.argv) > 1 else None):
        print(p)
