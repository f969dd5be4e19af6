"""Seed inputs from historical transactions."""

from __future__ import annotations

import logging
from collections.abc import Iterable

from ..evm.erc20 import EventLog
from ..evm.state import WorldState
from ..ingest import Replay, TransactionRecord, replay, seed_calls
from ..words import ADDRESS_MASK, TRANSFER_TOPIC
from .engine import SeedInput

log = logging.getLogger(__name__)


def touches(lg: EventLog, contract: int) -> bool:
    """An ERC-20 Transfer log moving tokens from or to ``contract``."""
    if len(lg.topics) < 3 or lg.topics[0] != TRANSFER_TOPIC:
        return False
    return (lg.topics[1] & ADDRESS_MASK) == contract or (lg.topics[2] & ADDRESS_MASK) == contract


def extract_seeds(records: Iterable[TransactionRecord], contract: int,
                  snapshots: dict[int, WorldState]) -> tuple[list[SeedInput], list[Replay]]:
    """Seeds for ``contract`` plus the replays that were skipped as divergent."""
    seeds: list[SeedInput] = []
    skipped: list[Replay] = []
    for rec in records:
        if rec.status != "success":
            continue
        world = snapshots.get(rec.block_number)
        if world is None:
            log.warning("no snapshot for block %d; %s skipped", rec.block_number, rec.hash)
            continue
        rep = replay(rec, world)
        if rep.divergent:
            log.warning("replay of %s diverges (%s); skipped", rec.hash, rep.reason)
            skipped.append(rep)
            continue
        if not any(touches(lg, contract) for lg in rep.result.logs):
            continue
        for c in seed_calls(rep, contract):
            if not c.calldata:
                continue
            seeds.append(SeedInput(c.caller, rec.sender, c.calldata, c.value, rec.block_number, contract, rec.hash))
    return seeds, skipped
