"""A small two-pass assembler for building test contracts."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..opcodes import BY_NAME


@dataclass
class _Item:
    kind: str  # op | push | label_push | label | mark | pad | raw
    name: str = ""
    value: int = 0
    width: int = 0
    data: bytes = b""


def filler(gap: int) -> bytes:
    """``gap`` bytes of harmless code: a JUMPDEST, PUSHk 0 / POP chunks, then STOP."""
    if gap <= 0:
        return b""
    out = bytearray([BY_NAME["JUMPDEST"].value])
    if gap == 1:
        return bytes(out)
    rem = gap - 2
    while rem >= 3:
        k = min(32, rem - 2)
        if 0 < rem - (k + 2) < 3:
            k -= 3
        out += bytes([0x5F + k]) + b"\x00" * k + bytes([BY_NAME["POP"].value])
        rem -= k + 2
    out += bytes([BY_NAME["JUMPDEST"].value]) * rem
    out.append(BY_NAME["STOP"].value)
    return bytes(out)


@dataclass
class Asm:
    items: list[_Item] = field(default_factory=list)

    def op(self, *names: str) -> Asm:
        for n in names:
            if n not in BY_NAME:
                raise ValueError(f"unknown mnemonic {n}")
            self.items.append(_Item("op", n))
        return self

    def push(self, value: int, width: int | None = None) -> Asm:
        if width is None:
            width = max(1, (value.bit_length() + 7) // 8)
        if not 1 <= width <= 32 or value >= 1 << (8 * width):
            raise ValueError(f"cannot push {value:#x} in {width} bytes")
        self.items.append(_Item("push", value=value, width=width))
        return self

    def push_label(self, label: str, width: int = 2) -> Asm:
        self.items.append(_Item("label_push", label, width=width))
        return self

    def label(self, name: str) -> Asm:
        """Place a JUMPDEST and name its pc."""
        self.items.append(_Item("label", name))
        return self

    def mark(self, name: str) -> Asm:
        """Name the pc of the next instruction without emitting anything."""
        self.items.append(_Item("mark", name))
        return self

    def pad_to(self, pc: int) -> Asm:
        self.items.append(_Item("pad", value=pc))
        return self

    def raw(self, data: bytes) -> Asm:
        self.items.append(_Item("raw", data=bytes(data)))
        return self

    def assemble(self) -> tuple[bytes, dict[str, int]]:
        labels: dict[str, int] = {}
        pc = 0
        for it in self.items:
            if it.kind in ("label", "mark"):
                labels[it.name] = pc
            pc += self._size(it, pc)
        out = bytearray()
        for it in self.items:
            if it.kind == "op":
                out.append(BY_NAME[it.name].value)
            elif it.kind == "label":
                out.append(BY_NAME["JUMPDEST"].value)
            elif it.kind == "push":
                out.append(0x5F + it.width)
                out += it.value.to_bytes(it.width, "big")
            elif it.kind == "label_push":
                out.append(0x5F + it.width)
                out += labels[it.name].to_bytes(it.width, "big")
            elif it.kind == "pad":
                if len(out) > it.value:
                    raise ValueError(f"code already past {it.value:#x} (at {len(out):#x})")
                out += filler(it.value - len(out))
            elif it.kind == "raw":
                out += it.data
        return bytes(out), labels

    @staticmethod
    def _size(it: _Item, pc: int) -> int:
        if it.kind in ("op", "label"):
            return 1
        if it.kind in ("push", "label_push"):
            return 1 + it.width
        if it.kind == "pad":
            return max(0, it.value - pc)
        if it.kind == "mark":
            return 0
        return len(it.data)
