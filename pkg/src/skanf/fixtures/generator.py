"""Parameterized generator for obfuscated bot-style test contracts.

Every generated contract follows one template: an optional origin/caller gate,
a calldata-driven jump into a handler region, and a token-moving CALL whose
parameters come from calldata or constants. Ground truth is recorded alongside
the bytecode and is checked by the concrete interpreter (see ``self_check``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Any

from ..bytecode import disassemble
from ..evm.erc20 import register_mock_erc20
from ..evm.interpreter import Tx, execute_transaction, reached_pc
from ..evm.state import WorldState
from ..words import ADDRESS_MASK, APPROVE_SELECTOR, TRANSFER_SELECTOR
from .asm import Asm

OWNER = 0xDEAD00000000000000000000000000000000BEEF
BOT = 0xB07B07B07B07B07B07B07B07B07B07B07B07B070
WETH = 0xC02AAA39B223FE8D0A0E5C4F27EAD9083C756CC2
ADVERSARY = 0xBADBADBADBADBADBADBADBADBADBADBADBADBAD0
BENIGN_RECIPIENT = 0x1111111111111111111111111111111111111111
FIXED_AMOUNT = 10**18

HANDLER_PC = 0x0A00


@dataclass(frozen=True)
class CallShape:
    """Where each parameter of the sink CALL comes from.

    ``*_source`` is ``"calldata"`` (read by CALLDATALOAD at ``*_offset``) or
    ``"constant"``.
    """

    target_source: str = "calldata"
    target_offset: int = 0x86
    target_const: int = WETH
    selector_source: str = "constant"
    selector_offset: int = 0x04
    selector_const: int = TRANSFER_SELECTOR
    recipient_source: str = "calldata"
    recipient_offset: int = 0xA6
    recipient_const: int = BENIGN_RECIPIENT
    amount_source: str = "calldata"
    amount_offset: int = 0xC6
    amount_const: int = FIXED_AMOUNT


@dataclass(frozen=True)
class FixtureSpec:
    name: str = "destroyer-inu"
    # bytes of calldata used as the jump selector; 0 means a direct jump
    dispatch_width: int = 2
    dispatch_offset: int = 0x84
    gate: str = "origin"  # none | origin | caller
    gate_addr: int = OWNER
    call_shape: CallShape = field(default_factory=CallShape)
    dead_blocks: int = 0
    # extra decoy handlers after the sink handler (at 0x0b00, 0x0c00, ...)
    decoys: int = 1
    # after a successful CALL, revert unless calldata byte at this offset == 1
    post_call_guard: int | None = None
    # before the CALL, require keccak256(calldata word at this offset) == storage[0]
    keccak_guard: int | None = None


@dataclass
class GroundTruth:
    spec: FixtureSpec
    code: bytes
    labels: dict[str, int]
    indirect_jumps: list[int]
    call_pc: int
    handler_pc: int
    dispatch_values: list[int]
    param_classes: dict[str, str]
    vulnerable: bool
    amount_controllable: bool
    dead_block_pcs: list[int]
    keccak_preimage: int | None = None

    def calldata(
        self,
        *,
        target: int = WETH,
        recipient: int = ADVERSARY,
        amount: int = FIXED_AMOUNT,
        selector: int | None = None,
        dispatch: int | None = None,
        length: int | None = None,
    ) -> bytes:
        """Calldata reaching the sink with the given parameter values."""
        s = self.spec
        sh = s.call_shape
        writes: list[tuple[int, bytes]] = []
        if s.dispatch_width:
            d = self.handler_pc if dispatch is None else dispatch
            dv = d >> 8 if s.dispatch_width == 1 else d
            writes.append((s.dispatch_offset, dv.to_bytes(s.dispatch_width, "big")))
        if sh.target_source == "calldata":
            writes.append((sh.target_offset, target.to_bytes(32, "big")))
        if sh.selector_source == "calldata":
            sel = sh.selector_const if selector is None else selector
            writes.append((sh.selector_offset, sel.to_bytes(4, "big")))
        if sh.recipient_source == "calldata":
            writes.append((sh.recipient_offset, recipient.to_bytes(32, "big")))
        if sh.amount_source == "calldata":
            writes.append((sh.amount_offset, amount.to_bytes(32, "big")))
        if s.post_call_guard is not None:
            writes.append((s.post_call_guard, b"\x01"))
        if s.keccak_guard is not None and self.keccak_preimage is not None:
            writes.append((s.keccak_guard, self.keccak_preimage.to_bytes(32, "big")))
        end = max(off + len(b) for off, b in writes) if writes else 4
        buf = bytearray(max(end, length or 0, 4))
        for off, b in writes:
            buf[off:off + len(b)] = b
        return bytes(buf)

    def sender(self) -> int:
        return self.spec.gate_addr if self.spec.gate != "none" else ADVERSARY

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.spec.name,
            "codeHex": "0x" + self.code.hex(),
            "indirectJumps": [hex(p) for p in self.indirect_jumps],
            "callPC": hex(self.call_pc),
            "handlerPC": hex(self.handler_pc),
            "dispatchValues": [hex(v) for v in self.dispatch_values],
            "paramClasses": self.param_classes,
            "vulnerable": self.vulnerable,
            "amountControllable": self.amount_controllable,
            "deadBlockPcs": [hex(p) for p in self.dead_block_pcs],
        }


KECCAK_PREIMAGE = 0x5EC12E7


def _load(a: Asm, source: str, offset: int, const: int, width: int = 20) -> None:
    if source == "calldata":
        a.push(offset, 1 if offset < 256 else 2).op("CALLDATALOAD")
    else:
        a.push(const, width)


def _dead(a: Asm, n: int, tag: str) -> None:
    # code after a terminator that no jump can reach: not JUMPDEST-headed
    for i in range(n):
        a.mark(f"{tag}{i}")
        a.push(i + 1, 1).op("POP", "STOP")


def _emit_sink(a: Asm, spec: FixtureSpec) -> None:
    sh = spec.call_shape
    a.push(0x40, 1).op("MLOAD")  # ptr
    if sh.selector_source == "calldata":
        a.push(sh.selector_offset, 1).op("CALLDATALOAD")
    else:
        a.push(sh.selector_const << 224, 32)
    a.op("DUP2", "MSTORE")
    _load(a, sh.recipient_source, sh.recipient_offset, sh.recipient_const)
    a.op("DUP2").push(4, 1).op("ADD", "MSTORE")
    _load(a, sh.amount_source, sh.amount_offset, sh.amount_const, 32)
    a.op("DUP2").push(0x24, 1).op("ADD", "MSTORE")
    a.push(0, 1).push(0, 1).push(0x44, 1).op("DUP4").push(0, 1)
    _load(a, sh.target_source, sh.target_offset, sh.target_const)
    a.op("GAS")
    a.mark("call")
    a.op("CALL", "ISZERO").push_label("fail").op("JUMPI")
    if spec.post_call_guard is not None:
        a.push(spec.post_call_guard, 1).op("CALLDATALOAD").push(0xF8, 1).op("SHR")
        a.push(1, 1).op("EQ").push_label("done").op("JUMPI").push(0, 1).op("DUP1", "REVERT")
        a.label("done")
    a.op("STOP")
    _dead(a, spec.dead_blocks, "dead")
    a.label("fail").push(0, 1).op("DUP1", "REVERT")


def _emit_decoy(a: Asm, k: int) -> None:
    # a harmless handler: store a calldata word, emit a log, return
    a.push(4, 1).op("CALLDATALOAD").push(k, 1).op("SSTORE")
    a.push(k, 1).push(0, 1).push(0, 1).op("LOG1")
    a.push(k, 1).push(0, 1).op("MSTORE").push(0x20, 1).push(0, 1).op("RETURN")


def build(spec: FixtureSpec) -> tuple[bytes, dict[str, int]]:
    a = Asm()
    a.push(0x80, 1).push(0x40, 1).op("MSTORE")
    if spec.gate in ("origin", "caller"):
        a.op("ORIGIN" if spec.gate == "origin" else "CALLER").push(spec.gate_addr, 20).op("EQ")
        a.push_label("ok").op("JUMPI").push(0, 1).op("DUP1", "REVERT")
        a.label("ok")
    if spec.keccak_guard is not None:
        # keccak256(calldata word) must equal storage slot 0; placed before the
        # dispatch so that no jump destination lies past it
        a.push(spec.keccak_guard, 1).op("CALLDATALOAD").push(0, 1).op("MSTORE")
        a.push(0x20, 1).push(0, 1).op("SHA3").push(0, 1).op("SLOAD").op("EQ")
        a.push_label("kok").op("JUMPI").push(0, 1).op("DUP1", "REVERT")
        a.label("kok")
    if spec.dispatch_width == 2:
        a.push(spec.dispatch_offset, 1).op("CALLDATALOAD").push(0xF0, 1).op("SHR")
    elif spec.dispatch_width == 1:
        a.push(spec.dispatch_offset, 1).op("CALLDATALOAD").push(0xF8, 1).op("SHR")
        a.push(8, 1).op("SHL")
    else:
        a.push(HANDLER_PC, 2)
    a.mark("dispatch").op("JUMP")
    a.mark("pad").pad_to(HANDLER_PC).label("handler")
    _emit_sink(a, spec)
    for k in range(spec.decoys):
        a.pad_to(HANDLER_PC + 0x100 * (k + 1)).label(f"decoy{k}")
        _emit_decoy(a, k + 1)
    return a.assemble()


def param_classes(spec: FixtureSpec) -> dict[str, str]:
    sh = spec.call_shape

    def cls(source: str, fixed: str) -> str:
        return "Controllable" if source == "calldata" else fixed

    target_fixed = "FixedRisky" if sh.target_const == WETH else "FixedSafe"
    sel_fixed = "FixedRisky" if sh.selector_const in (TRANSFER_SELECTOR, APPROVE_SELECTOR) else "FixedSafe"
    return {
        "target": cls(sh.target_source, target_fixed),
        "selector": cls(sh.selector_source, sel_fixed),
        "arg1": cls(sh.recipient_source, "FixedSafe"),
        "arg2": cls(sh.amount_source, "FixedSafe"),
    }


def generate(spec: FixtureSpec) -> tuple[bytes, GroundTruth]:
    code, labels = build(spec)
    classes = param_classes(spec)
    vulnerable = (
        classes["target"] != "FixedSafe" and classes["selector"] != "FixedSafe" and classes["arg1"] == "Controllable"
    )
    indirect = [labels["dispatch"]] if spec.dispatch_width else []
    gt = GroundTruth(
        spec=spec,
        code=code,
        labels=labels,
        indirect_jumps=indirect,
        call_pc=labels["call"],
        handler_pc=labels["handler"],
        dispatch_values=[labels["handler"]] if spec.dispatch_width else [],
        param_classes=classes,
        vulnerable=vulnerable,
        amount_controllable=classes["arg2"] == "Controllable",
        dead_block_pcs=[labels[f"dead{i}"] for i in range(spec.dead_blocks)],
        keccak_preimage=KECCAK_PREIMAGE if spec.keccak_guard is not None else None,
    )
    return code, gt


def fixture_world(gt: GroundTruth, balance: int = 22 * 10**18, block: int = 20_000_000) -> WorldState:
    """World with the bot deployed and a mock WETH holding ``balance`` for it."""
    from ..words import keccak_int

    world = WorldState()
    world.block.number = block
    world.block.timestamp = 1_719_792_000
    world.set_code(BOT, gt.code)
    if gt.keccak_preimage is not None:
        world.account(BOT).storage[0] = keccak_int(gt.keccak_preimage.to_bytes(32, "big"))
    register_mock_erc20(world, WETH, {BOT: balance, OWNER: 5 * 10**18}, "WETH")
    world.account(OWNER).balance = 10**20
    world.account(ADVERSARY).balance = 10**20
    return world


def self_check(gt: GroundTruth, exhaustive: bool = False) -> list[int]:
    """Confirm the ground truth with the concrete interpreter.

    Returns the dispatch values that reach the sink CALL; with ``exhaustive``
    every value of the dispatch width is tried, otherwise only the recorded
    handler and a few neighbours.
    """
    prog = disassemble(gt.code)
    ins = prog.at(gt.call_pc)
    assert ins.opcode.mnemonic == "CALL", f"{gt.spec.name}: no CALL at {gt.call_pc:#x}"
    for pc in gt.indirect_jumps:
        assert prog.at(pc).opcode.mnemonic == "JUMP"
    world = fixture_world(gt)
    width = gt.spec.dispatch_width
    if width == 0:
        r = execute_transaction(world.clone(), Tx(gt.sender(), BOT, data=gt.calldata(length=0x100)))
        return [gt.handler_pc] if reached_pc(r, gt.call_pc) else []
    if exhaustive:
        candidates = [v << 8 if width == 1 else v for v in range(1 << (8 * width))]
    else:
        h = gt.handler_pc
        candidates = [h, h - 0x100, h + 0x100, 0, h + 1]
    hits = []
    base = gt.calldata(length=0x100)
    for v in candidates:
        data = bytearray(base)
        dv = v >> 8 if width == 1 else v
        data[gt.spec.dispatch_offset:gt.spec.dispatch_offset + width] = dv.to_bytes(width, "big")
        r = execute_transaction(world.clone(), Tx(gt.sender(), BOT, data=bytes(data)), record_trace=False)
        # the sink is the only CALL these contracts make
        if any(c.depth == 1 and c.caller == BOT for c in r.calls):
            hits.append(v)
    return hits


# --- named fixtures -----------------------------------------------------------------

def canonical_spec() -> FixtureSpec:
    return FixtureSpec()


NAMED_SPECS: dict[str, FixtureSpec] = {
    "destroyer-inu": FixtureSpec(),
    "ungated": FixtureSpec(name="ungated", gate="none"),
    "caller-gated": FixtureSpec(name="caller-gated", gate="caller"),
    "fixed-amount-drain": FixtureSpec(
        name="fixed-amount-drain",
        gate="none",
        call_shape=CallShape(
            target_source="constant", selector_source="calldata", selector_offset=0x04, amount_source="constant"
        ),
    ),
    "approve": FixtureSpec(
        name="approve", gate="none", call_shape=CallShape(selector_const=APPROVE_SELECTOR)
    ),
    "safe-constant": FixtureSpec(
        name="safe-constant",
        gate="none",
        call_shape=CallShape(
            target_source="constant",
            target_const=BENIGN_RECIPIENT,
            selector_const=0x70A08231,
            recipient_source="constant",
            amount_source="constant",
        ),
    ),
    "dead-block": FixtureSpec(name="dead-block", dead_blocks=2),
    "post-call-guard": FixtureSpec(name="post-call-guard", gate="none", post_call_guard=0xF0),
    "keccak-guard": FixtureSpec(name="keccak-guard", gate="none", keccak_guard=0xE6),
    "direct": FixtureSpec(name="direct", dispatch_width=0, gate="none"),
}


def named(name: str) -> tuple[bytes, GroundTruth]:
    return generate(NAMED_SPECS[name])


def random_spec(rng: random.Random, index: int) -> FixtureSpec:
    """A random obfuscated spec whose dispatch bytes fit in 128-byte calldata."""
    width = rng.choice([1, 1, 2])
    disp = rng.randrange(4, 96)
    used = {disp, disp + 1}

    def off() -> int:
        while True:
            o = rng.randrange(4, 96)
            if not used & set(range(o, o + 32)) or rng.random() < 0.2:
                used.add(o)
                return o

    shape = CallShape(
        target_source=rng.choice(["calldata", "constant"]),
        target_offset=off(),
        selector_source=rng.choice(["constant", "constant", "calldata"]),
        selector_offset=off(),
        selector_const=rng.choice([TRANSFER_SELECTOR, APPROVE_SELECTOR, 0x70A08231]),
        recipient_source=rng.choice(["calldata", "calldata", "constant"]),
        recipient_offset=off(),
        amount_source=rng.choice(["calldata", "constant"]),
        amount_offset=off(),
        amount_const=rng.randrange(1, 10**18),
    )
    return FixtureSpec(
        name=f"random-{index:03d}",
        dispatch_width=width,
        dispatch_offset=disp,
        gate=rng.choice(["none", "origin", "caller"]),
        call_shape=shape,
        dead_blocks=rng.choice([0, 0, 0, 1]),
        decoys=rng.randrange(1, 4),
        post_call_guard=rng.choice([None, None, rng.randrange(100, 128)]),
    )


def random_fixtures(n: int, seed: int = 0) -> list[tuple[bytes, GroundTruth]]:
    rng = random.Random(seed)
    return [generate(random_spec(rng, i)) for i in range(n)]


# --- auxiliary fixtures used by specific tests ---------------------------------------------

def loop_fixture() -> tuple[bytes, dict[str, int]]:
    """A loop whose body is an indirect jump chosen by successive calldata bytes.

    Byte ``i`` of calldata word 4 selects the i-th iteration's handler:
    0x0a -> continue looping, 0x0b -> sink CALL, anything else -> fault.
    """
    a = Asm()
    a.push(0, 1).push(0xA0, 1).op("MSTORE")  # i = 0 at mem[0xa0]
    a.label("loop")
    a.push(0xA0, 1).op("MLOAD").push(4, 1).op("CALLDATALOAD").op("DUP2", "BYTE")
    a.push(8, 1).op("SHL", "SWAP1", "POP")
    a.mark("dispatch")
    a.op("JUMP")
    a.pad_to(0x0A00).label("again")
    a.push(0xA0, 1).op("MLOAD").push(1, 1).op("ADD").push(0xA0, 1).op("MSTORE")
    a.push_label("loop").op("JUMP")
    a.pad_to(0x0B00).label("sink")
    a.push(TRANSFER_SELECTOR << 224, 32).push(0, 1).op("MSTORE")
    a.push(0x44, 1).op("CALLDATALOAD").push(4, 1).op("MSTORE")
    a.push(0x64, 1).op("CALLDATALOAD").push(0x24, 1).op("MSTORE")
    a.push(0, 1).push(0, 1).push(0x44, 1).push(0, 1).push(0, 1)
    a.push(0x24, 1).op("CALLDATALOAD").op("GAS")
    a.mark("call")
    a.op("CALL", "POP", "STOP")
    return a.assemble()


def multi_call_fixture() -> tuple[bytes, dict[str, int]]:
    """Router with a balanceOf probe followed by a calldata-driven transfer."""
    a = Asm()
    a.push(0x80, 1).push(0x40, 1).op("MSTORE")
    # balanceOf(self) on WETH, result ignored
    a.push(0x70A08231 << 224, 32).push(0x80, 1).op("MSTORE")
    a.op("ADDRESS").push(0x84, 1).op("MSTORE")
    a.push(0x20, 1).push(0xC0, 1).push(0x24, 1).push(0x80, 1).push(0, 1).push(WETH, 20).op("GAS")
    a.mark("call0")
    a.op("CALL", "POP")
    # transfer(calldata[36], calldata[68]) on calldata[4]
    a.push(TRANSFER_SELECTOR << 224, 32).push(0x100, 2).op("MSTORE")
    a.push(0x24, 1).op("CALLDATALOAD").push(0x104, 2).op("MSTORE")
    a.push(0x44, 1).op("CALLDATALOAD").push(0x124, 2).op("MSTORE")
    a.push(0, 1).push(0, 1).push(0x44, 1).push(0x100, 2).push(0, 1)
    a.push(4, 1).op("CALLDATALOAD").op("GAS")
    a.mark("call1")
    a.op("CALL", "POP", "STOP")
    return a.assemble()


def control_dependence_fixture() -> tuple[bytes, dict[str, int]]:
    """The CALL amount depends on calldata only through a branch (5 or 7)."""
    a = Asm()
    a.push(TRANSFER_SELECTOR << 224, 32).push(0, 1).op("MSTORE")
    a.push(ADVERSARY, 20).push(4, 1).op("MSTORE")
    a.push(5, 1).push(0, 1).op("CALLDATALOAD").push_label("seven").op("JUMPI")
    a.push_label("store").op("JUMP")
    a.label("seven").op("POP").push(7, 1)
    a.label("store").push(0x24, 1).op("MSTORE")
    a.push(0, 1).push(0, 1).push(0x44, 1).push(0, 1).push(0, 1).push(WETH, 20).op("GAS")
    a.mark("call")
    a.op("CALL", "STOP")
    return a.assemble()


def dead_block_count(gt: GroundTruth) -> int:
    return gt.spec.dead_blocks


def with_name(spec: FixtureSpec, name: str) -> FixtureSpec:
    return replace(spec, name=name)


__all__ = [
    "ADVERSARY", "BOT", "OWNER", "WETH", "CallShape", "FixtureSpec", "GroundTruth",
    "NAMED_SPECS", "build", "canonical_spec", "fixture_world", "generate", "named",
    "random_fixtures", "random_spec", "self_check", "ADDRESS_MASK",
]
