"""Native ERC-20 handler used in place of compiled token bytecode."""

from __future__ import annotations

from dataclasses import dataclass

from ..words import (
    ADDRESS_MASK,
    ALLOWANCE_SELECTOR,
    APPROVAL_TOPIC,
    APPROVE_SELECTOR,
    BALANCE_OF_SELECTOR,
    TRANSFER_FROM_SELECTOR,
    TRANSFER_SELECTOR,
    TRANSFER_TOPIC,
    UINT_MAX,
    selector,
)
from .state import Account, MockToken, StateError, WorldState

TOTAL_SUPPLY_SELECTOR = selector("totalSupply()")


@dataclass(frozen=True)
class EventLog:
    emitter: int
    topics: tuple[int, ...]
    data: bytes

    def to_json(self) -> dict:
        return {
            "address": "0x" + format(self.emitter, "040x"),
            "topics": ["0x" + format(t, "064x") for t in self.topics],
            "data": "0x" + self.data.hex(),
        }


def register_mock_erc20(world: WorldState, address: int, balances: dict[int, int], name: str = "MOCK") -> None:
    """Install a native ERC-20 handler at ``address``."""
    if address in world.accounts and (world.accounts[address].code or world.accounts[address].token):
        raise StateError(f"address {address:#x} already in use")
    acct = world.accounts.get(address) or Account()
    acct.token = MockToken(name, dict(balances))
    world.accounts[address] = acct


def _word(data: bytes, i: int) -> int:
    chunk = data[4 + 32 * i:4 + 32 * (i + 1)]
    return int.from_bytes(chunk.ljust(32, b"\x00"), "big")


def _enc(v: int) -> bytes:
    return v.to_bytes(32, "big")


def _transfer_log(token: int, frm: int, to: int, amount: int) -> EventLog:
    return EventLog(token, (TRANSFER_TOPIC, frm, to), _enc(amount))


def call_token(token_addr: int, token: MockToken, caller: int, data: bytes) -> tuple[bool, bytes, list[EventLog]]:
    """Execute one call against a mock token; mutates ``token`` only on success."""
    if len(data) < 4:
        return False, b"", []
    sel = int.from_bytes(data[:4], "big")
    if sel == BALANCE_OF_SELECTOR:
        return True, _enc(token.balances.get(_word(data, 0) & ADDRESS_MASK, 0)), []
    if sel == TOTAL_SUPPLY_SELECTOR:
        return True, _enc(token.total_supply()), []
    if sel == ALLOWANCE_SELECTOR:
        key = (_word(data, 0) & ADDRESS_MASK, _word(data, 1) & ADDRESS_MASK)
        return True, _enc(token.allowances.get(key, 0)), []
    if sel == TRANSFER_SELECTOR:
        to, amount = _word(data, 0) & ADDRESS_MASK, _word(data, 1)
        if token.balances.get(caller, 0) < amount:
            return False, b"", []
        _move(token, caller, to, amount)
        return True, _enc(1), [_transfer_log(token_addr, caller, to, amount)]
    if sel == APPROVE_SELECTOR:
        spender, amount = _word(data, 0) & ADDRESS_MASK, _word(data, 1)
        token.allowances[(caller, spender)] = amount
        return True, _enc(1), [EventLog(token_addr, (APPROVAL_TOPIC, caller, spender), _enc(amount))]
    if sel == TRANSFER_FROM_SELECTOR:
        frm, to, amount = _word(data, 0) & ADDRESS_MASK, _word(data, 1) & ADDRESS_MASK, _word(data, 2)
        allowed = token.allowances.get((frm, caller), 0)
        if token.balances.get(frm, 0) < amount or allowed < amount:
            return False, b"", []
        if allowed != UINT_MAX:
            token.allowances[(frm, caller)] = allowed - amount
        _move(token, frm, to, amount)
        return True, _enc(1), [_transfer_log(token_addr, frm, to, amount)]
    return False, b"", []


def _move(token: MockToken, frm: int, to: int, amount: int) -> None:
    token.balances[frm] = token.balances.get(frm, 0) - amount
    token.balances[to] = token.balances.get(to, 0) + amount
    # keep zero balances out so equal states compare equal
    for a in (frm, to):
        if token.balances.get(a) == 0:
            del token.balances[a]
