"""Basic blocks, control-flow graph, indirect-jump detection and coverage."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import NamedTuple

from .bytecode import Executable, Instruction
from .opcodes import TERMINATORS
from .words import BINARY, TERNARY, UNARY

STACK_DEPTH = 32

# dependence sources recognised for indirect-jump detection
SOURCE_OPS = {
    "CALLDATALOAD": "calldata",
    "CALLVALUE": "value",
    "MLOAD": "memory",
    "SLOAD": "storage",
}


# --- abstract stack values ---------------------------------------------------

class Const(NamedTuple):
    value: int


class Dyn(NamedTuple):
    """A runtime value; ``sources`` names the inputs it depends on."""

    sources: frozenset[str]
    producer: int | None


UNKNOWN = Dyn(frozenset({"unknown"}), None)

AbsValue = Const | Dyn


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int  # index into the executable's instruction list
    end: int  # exclusive
    start_pc: int | None
    terminator: str  # terminating mnemonic, or "fallthrough"

    @property
    def label(self) -> str:
        return f"{self.start_pc:#06x}" if self.start_pc is not None else f"virt{self.id}"


class Edge(NamedTuple):
    src: int
    dst: int
    kind: str  # jump | fall | branch-true | branch-false


class IndirectJump(NamedTuple):
    jump_pc: int
    dest_var: str


@dataclass
class Cfg:
    program: Executable
    blocks: list[BasicBlock]
    edges: list[Edge]
    # instruction index -> block id
    block_index: list[int] = field(repr=False)
    # blocks whose final jump could not be resolved to a constant
    unresolved: dict[int, AbsValue] = field(default_factory=dict, repr=False)
    # abstract stack top (jump destination operand) per JUMP/JUMPI instruction index
    jump_operands: dict[int, AbsValue] = field(default_factory=dict, repr=False)

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    def successors(self, bid: int) -> list[int]:
        return [e.dst for e in self.edges if e.src == bid]

    def block_at_pc(self, pc: int) -> BasicBlock:
        for b in self.blocks:
            for i in range(b.start, b.end):
                if self.program.instructions[i].pc == pc:
                    return b
        raise KeyError(pc)

    def block_of(self, index: int) -> BasicBlock:
        return self.blocks[self.block_index[index]]

    def edge_list(self) -> str:
        """Text export: one ``src -> dst kind`` line per edge."""
        return "\n".join(
            f"{self.blocks[e.src].label} -> {self.blocks[e.dst].label} {e.kind}" for e in self.edges
        )

    def to_dot(self) -> str:
        lines = ["digraph cfg {", "  node [shape=box fontname=monospace];"]
        for b in self.blocks:
            body = "\\l".join(_fmt(ins) for ins in self.program.instructions[b.start:b.end])
            lines.append(f'  b{b.id} [label="{b.label}:\\l{body}\\l"];')
        for e in self.edges:
            lines.append(f'  b{e.src} -> b{e.dst} [label="{e.kind}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fmt(ins: Instruction) -> str:
    pc = "    -" if ins.pc is None else f"{ins.pc:#06x}"
    return f"{pc} {ins}"


# --- construction -------------------------------------------------------------

def _leaders(program: Executable) -> list[int]:
    instrs = program.instructions
    n = len(instrs)
    leaders = {0, program.code_end} if n else set()
    for i, ins in enumerate(instrs):
        if ins.opcode.mnemonic == "JUMPDEST":
            leaders.add(i)
        if ins.opcode.mnemonic in TERMINATORS and i + 1 < n:
            leaders.add(i + 1)
    return sorted(x for x in leaders if x < n)


def _simulate(
    instrs: Iterable[Instruction], stack: list[AbsValue]
) -> tuple[list[AbsValue], AbsValue | None]:
    """Run the constant-stack abstraction over one block.

    Returns the exit stack and the jump operand (if the block ends in a jump).
    Slots below the tracked window read as UNKNOWN.
    """
    st = list(stack)
    jump_operand: AbsValue | None = None

    def pop() -> AbsValue:
        return st.pop() if st else UNKNOWN

    for ins in instrs:
        name = ins.opcode.mnemonic
        if ins.opcode.immediate_len or name == "PUSH0":
            st.append(Const(ins.arg))
        elif name.startswith("DUP"):
            n = int(name[3:])
            st.append(st[-n] if len(st) >= n else UNKNOWN)
        elif name.startswith("SWAP"):
            n = int(name[4:])
            while len(st) <= n:
                st.insert(0, UNKNOWN)
            st[-1], st[-1 - n] = st[-1 - n], st[-1]
        elif name in ("JUMP", "JUMPI"):
            jump_operand = pop()
            if name == "JUMPI":
                pop()
        elif name == "PC" and ins.pc is not None:
            st.append(Const(ins.pc))
        else:
            args = [pop() for _ in range(ins.opcode.stack_pops)]
            if ins.opcode.stack_pushes:
                st.append(_transfer(name, args, ins))
        if len(st) > STACK_DEPTH:
            del st[: len(st) - STACK_DEPTH]
    return st, jump_operand


def _transfer(name: str, args: list[AbsValue], ins: Instruction) -> AbsValue:
    if args and all(isinstance(a, Const) for a in args):
        vals = [a.value for a in args]
        if name in BINARY:
            return Const(BINARY[name](*vals))
        if name in UNARY:
            return Const(UNARY[name](*vals))
        if name in TERNARY:
            return Const(TERNARY[name](*vals))
    sources: set[str] = set()
    for a in args:
        if isinstance(a, Dyn):
            sources |= a.sources
    src = SOURCE_OPS.get(name)
    if src:
        sources.add(src)
    if name == "CALLDATACOPY":
        sources.add("calldata")
    return Dyn(frozenset(sources), ins.pc)


def build_cfg(program: Executable) -> Cfg:
    instrs = program.instructions
    leaders = _leaders(program)
    blocks: list[BasicBlock] = []
    block_index = [0] * len(instrs)
    for bid, start in enumerate(leaders):
        end = leaders[bid + 1] if bid + 1 < len(leaders) else len(instrs)
        last = instrs[end - 1].opcode.mnemonic
        term = last if last in TERMINATORS else "fallthrough"
        blocks.append(BasicBlock(bid, start, end, instrs[start].pc, term))
        for i in range(start, end):
            block_index[i] = bid

    edges: list[Edge] = []
    unresolved: dict[int, AbsValue] = {}
    jump_operands: dict[int, AbsValue] = {}
    targets = program.targets
    prev_exit: list[AbsValue] = []
    prev_falls = False
    for b in blocks:
        inherit = prev_falls and instrs[b.start].opcode.mnemonic != "JUMPDEST"
        exit_stack, operand = _simulate(instrs[b.start:b.end], prev_exit if inherit else [])
        # running off the end of the real code is an implicit STOP
        falls_to_next = (
            b.terminator in ("fallthrough", "JUMPI") and b.end != program.code_end and b.end < len(instrs)
        )
        if b.terminator in ("JUMP", "JUMPI"):
            jump_operands[b.end - 1] = operand
            if isinstance(operand, Const):
                idx = targets.get(operand.value)
                if idx is not None and instrs[idx].opcode.mnemonic == "JUMPDEST":
                    kind = "jump" if b.terminator == "JUMP" else "branch-true"
                    edges.append(Edge(b.id, block_index[idx], kind))
            else:
                unresolved[b.id] = operand
        if falls_to_next and b.id + 1 < len(blocks):
            edges.append(Edge(b.id, b.id + 1, "branch-false" if b.terminator == "JUMPI" else "fall"))
        prev_exit, prev_falls = exit_stack, falls_to_next
    return Cfg(program, blocks, edges, block_index, unresolved, jump_operands)


def identify_indirect_jumps(program: Executable, cfg: Cfg | None = None) -> list[IndirectJump]:
    """Jump sites whose destination is not a statically resolvable constant."""
    cfg = cfg if cfg is not None else build_cfg(program)
    out = []
    for idx, operand in sorted(cfg.jump_operands.items()):
        if isinstance(operand, Const):
            continue
        ins = program.instructions[idx]
        if ins.pc is None:
            continue
        producer = operand.producer
        out.append(IndirectJump(ins.pc, f"v{producer:x}" if producer is not None else f"v{ins.pc:x}_in"))
    return sorted(out)


def reachable_blocks(cfg: Cfg, start: BasicBlock | int | None = None) -> set[int]:
    """Forward closure over CFG edges (block ids)."""
    sid = cfg.entry.id if start is None else (start.id if isinstance(start, BasicBlock) else start)
    succ: dict[int, list[int]] = {}
    for e in cfg.edges:
        succ.setdefault(e.src, []).append(e.dst)
    seen = {sid}
    work = [sid]
    while work:
        b = work.pop()
        for d in succ.get(b, ()):
            if d not in seen:
                seen.add(d)
                work.append(d)
    return seen


def code_coverage(program: Executable, cfg: Cfg | None = None) -> float:
    cfg = cfg if cfg is not None else build_cfg(program)
    if not cfg.blocks:
        return 1.0
    return len(reachable_blocks(cfg)) / len(cfg.blocks)


def call_sites(program: Executable) -> list[int]:
    """Pcs of all CALL instructions, ascending."""
    return sorted(
        ins.pc for ins in program.instructions if ins.opcode.mnemonic == "CALL" and ins.pc is not None
    )
