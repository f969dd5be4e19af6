"""Simulated world state: accounts, mock tokens, block environment, snapshots."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

from ..bytecode import Executable, disassemble, parse_hex
from ..words import hex_addr, parse_int


class StateError(Exception):
    pass


@dataclass
class MockToken:
    """State of a native ERC-20 handler."""

    name: str = "MOCK"
    balances: dict[int, int] = field(default_factory=dict)
    allowances: dict[tuple[int, int], int] = field(default_factory=dict)

    def copy(self) -> MockToken:
        return MockToken(self.name, dict(self.balances), dict(self.allowances))

    def total_supply(self) -> int:
        return sum(self.balances.values())


@dataclass
class Account:
    balance: int = 0
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)
    nonce: int = 0
    token: MockToken | None = None
    # execution override (e.g. an instrumented program); never serialized
    executable: Executable | None = field(default=None, compare=False, repr=False)

    def copy(self) -> Account:
        return Account(
            self.balance,
            self.code,
            dict(self.storage),
            self.nonce,
            self.token.copy() if self.token is not None else None,
            self.executable,
        )

    @property
    def is_native(self) -> bool:
        return self.token is not None


@dataclass
class BlockEnv:
    number: int = 0
    timestamp: int = 0
    coinbase: int = 0
    chain_id: int = 1
    gaslimit: int = 30_000_000
    basefee: int = 0


_PROGRAM_CACHE: dict[bytes, Executable] = {}


def program_for(code: bytes) -> Executable:
    prog = _PROGRAM_CACHE.get(code)
    if prog is None:
        if len(_PROGRAM_CACHE) > 4096:
            _PROGRAM_CACHE.clear()
        prog = _PROGRAM_CACHE[code] = disassemble(code)
    return prog


class WorldState:
    """Accounts keyed by 160-bit integer address plus the block environment."""

    def __init__(self, accounts: dict[int, Account] | None = None, block: BlockEnv | None = None):
        self.accounts: dict[int, Account] = accounts if accounts is not None else {}
        self.block = block if block is not None else BlockEnv()
        self._snapshots: list[tuple[int, dict[int, Account]]] = []
        self._next_token = 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldState):
            return NotImplemented
        return self.accounts == other.accounts and self.block == other.block

    def __repr__(self) -> str:
        return f"WorldState(block={self.block.number}, accounts={len(self.accounts)})"

    # account access

    def get(self, addr: int) -> Account | None:
        return self.accounts.get(addr)

    def account(self, addr: int) -> Account:
        acct = self.accounts.get(addr)
        if acct is None:
            acct = self.accounts[addr] = Account()
        return acct

    def set_code(self, addr: int, code: bytes) -> None:
        acct = self.account(addr)
        if acct.token is not None:
            raise StateError(f"{hex_addr(addr)} is a native token handler")
        acct.code = bytes(code)

    def balance(self, addr: int) -> int:
        acct = self.accounts.get(addr)
        return acct.balance if acct else 0

    def storage_at(self, addr: int, slot: int) -> int:
        acct = self.accounts.get(addr)
        return acct.storage.get(slot, 0) if acct else 0

    def executable(self, addr: int) -> Executable | None:
        acct = self.accounts.get(addr)
        if acct is None:
            return None
        if acct.executable is not None:
            return acct.executable
        if not acct.code:
            return None
        return program_for(acct.code)

    def override_executable(self, addr: int, executable: Executable | None) -> None:
        self.account(addr).executable = executable

    def tokens(self) -> list[int]:
        return sorted(a for a, acct in self.accounts.items() if acct.token is not None)

    # snapshots

    def copy_accounts(self) -> dict[int, Account]:
        return {a: acct.copy() for a, acct in self.accounts.items()}

    def clone(self) -> WorldState:
        return WorldState(self.copy_accounts(), copy.copy(self.block))

    def snapshot(self) -> int:
        token = self._next_token
        self._next_token += 1
        self._snapshots.append((token, self.copy_accounts()))
        return token

    def rollback(self, token: int) -> None:
        """Restore the state captured by ``token``; later snapshots are dropped."""
        for i, (t, saved) in enumerate(self._snapshots):
            if t == token:
                self.accounts = {a: acct.copy() for a, acct in saved.items()}
                del self._snapshots[i:]
                return
        raise StateError(f"unknown snapshot token {token}")

    def discard(self, token: int) -> None:
        for i, (t, _) in enumerate(self._snapshots):
            if t == token:
                del self._snapshots[i:]
                return
        raise StateError(f"unknown snapshot token {token}")

    # serialization (state snapshot JSON)

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> WorldState:
        blk = doc.get("block", {})
        block = BlockEnv(
            number=parse_int(blk.get("number", 0)),
            timestamp=parse_int(blk.get("timestamp", 0)),
            coinbase=parse_int(blk.get("coinbase", 0)),
            chain_id=parse_int(blk.get("chain_id", 1)),
        )
        world = cls(block=block)
        for addr_s, a in doc.get("accounts", {}).items():
            addr = parse_int(addr_s)
            acct = Account(balance=parse_int(a.get("balance", 0)), nonce=parse_int(a.get("nonce", 0)))
            if "codeHex" in a and "mockToken" in a:
                raise StateError(f"account {addr_s}: codeHex and mockToken are mutually exclusive")
            if "codeHex" in a:
                acct.code = parse_hex(a["codeHex"]) if a["codeHex"] else b""
            if "mockToken" in a:
                mt = a["mockToken"]
                acct.token = MockToken(
                    name=mt.get("name", "MOCK"),
                    balances={parse_int(k): parse_int(v) for k, v in mt.get("balances", {}).items()},
                    allowances={
                        (parse_int(o), parse_int(s)): parse_int(v)
                        for o, m in mt.get("allowances", {}).items()
                        for s, v in m.items()
                    },
                )
            acct.storage = {parse_int(k): parse_int(v) for k, v in a.get("storage", {}).items()}
            world.accounts[addr] = acct
        return world

    def to_json(self) -> dict[str, Any]:
        accounts: dict[str, Any] = {}
        for addr in sorted(self.accounts):
            acct = self.accounts[addr]
            entry: dict[str, Any] = {"balance": hex(acct.balance)}
            if acct.nonce:
                entry["nonce"] = acct.nonce
            if acct.token is not None:
                mt: dict[str, Any] = {
                    "name": acct.token.name,
                    "balances": {hex_addr(k): hex(v) for k, v in sorted(acct.token.balances.items())},
                }
                if acct.token.allowances:
                    allow: dict[str, dict[str, str]] = {}
                    for (o, s), v in sorted(acct.token.allowances.items()):
                        allow.setdefault(hex_addr(o), {})[hex_addr(s)] = hex(v)
                    mt["allowances"] = allow
                entry["mockToken"] = mt
            else:
                entry["codeHex"] = "0x" + acct.code.hex()
            if acct.storage:
                entry["storage"] = {hex(k): hex(v) for k, v in sorted(acct.storage.items())}
            accounts[hex_addr(addr)] = entry
        return {
            "block": {
                "number": self.block.number,
                "timestamp": self.block.timestamp,
                "coinbase": hex_addr(self.block.coinbase),
                "chain_id": self.block.chain_id,
            },
            "accounts": accounts,
        }
