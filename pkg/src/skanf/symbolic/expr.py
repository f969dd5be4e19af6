"""Symbolic 256-bit expressions with folding smart constructors.

Expressions are immutable trees of ``Const``, ``Var`` and ``Op`` nodes.
Operator names are lower-case EVM mnemonics with operands in stack order
(first operand = top of stack). Two structural operators extend the set:

* ``concat`` - exactly 32 byte-sized parts, most significant first;
* ``sha3``   - keccak256 over a sequence of byte-sized parts (uninterpreted
  unless every part is concrete).
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence

from ..words import BINARY, TERNARY, UINT_MAX, UNARY, keccak_int

BOOL_OPS = frozenset({"lt", "gt", "slt", "sgt", "eq", "iszero"})


class Expr:
    __slots__ = ("_hash", "bits", "_vars")

    def __repr__(self) -> str:
        return to_str(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value
        self.bits = value.bit_length()
        self._hash = hash(("c", value))
        self._vars = frozenset()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Const) and other.value == self.value

    def __hash__(self) -> int:
        return self._hash


class Var(Expr):
    """A free variable; ``bits`` bounds its value range."""

    __slots__ = ("name",)

    def __init__(self, name: str, bits: int = 256):
        self.name = name
        self.bits = bits
        self._hash = hash(("v", name))
        self._vars = frozenset({name})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Var) and other.name == self.name

    def __hash__(self) -> int:
        return self._hash


class Op(Expr):
    __slots__ = ("op", "args")

    def __init__(self, op: str, args: tuple[Expr, ...], bits: int = 256):
        self.op = op
        self.args = args
        self.bits = bits
        self._hash = hash((op, args))
        vs: frozenset = frozenset()
        for a in args:
            if a._vars:
                vs = vs | a._vars
        self._vars = vs

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Op)
            and other._hash == self._hash
            and other.op == self.op
            and other.args == self.args
        )

    def __hash__(self) -> int:
        return self._hash


ZERO = Const(0)
ONE = Const(1)
_CONSTS = [Const(i) for i in range(256)]


def const(v: int) -> Const:
    return _CONSTS[v] if 0 <= v < 256 else Const(v & UINT_MAX)


def var(name: str, bits: int = 256) -> Var:
    return Var(name, bits)


def byte_var(i: int) -> Var:
    return Var(f"cb{i}", 8)


def is_const(e: Expr) -> bool:
    return isinstance(e, Const)


def variables(e: Expr) -> frozenset[str]:
    return e._vars


# --- concrete operator table ------------------------------------------------

_FOLD: dict[str, Callable[..., int]] = {}
for _name, _fn in BINARY.items():
    _FOLD[_name.lower()] = _fn
for _name, _fn in UNARY.items():
    _FOLD[_name.lower()] = _fn
for _name, _fn in TERNARY.items():
    _FOLD[_name.lower()] = _fn


# --- byte views -----------------------------------------------------------------

def byte_parts(e: Expr) -> list[Expr]:
    """The 32 byte-sized parts of ``e``, most significant first."""
    if isinstance(e, Const):
        return [_CONSTS[b] for b in e.value.to_bytes(32, "big")]
    if isinstance(e, Op) and e.op == "concat":
        return list(e.args)
    if e.bits <= 8:
        return [ZERO] * 31 + [e]
    lead = 32 - (e.bits + 7) // 8
    return [ZERO] * lead + [Op("byte", (_CONSTS[i], e), 8) for i in range(lead, 32)]


def concat(parts: Sequence[Expr]) -> Expr:
    """Assemble a word from 32 byte parts, folding where possible."""
    assert len(parts) == 32
    if all(isinstance(p, Const) for p in parts):
        return const(int.from_bytes(bytes(p.value for p in parts), "big"))
    lead = 0
    while lead < 32 and parts[lead] == ZERO:
        lead += 1
    # reassembling byte(lead..31, W) gives back W when W fits
    p0 = parts[lead] if lead < 32 else None
    if isinstance(p0, Op) and p0.op == "byte":
        base = p0.args[1]
        if base.bits <= 8 * (32 - lead) and all(
            isinstance(p, Op) and p.op == "byte" and p.args[0] == _CONSTS[i] and p.args[1] == base
            for i, p in enumerate(parts[lead:], start=lead)
        ):
            return base
    # a single low byte part is just that byte
    if lead >= 31 and parts[31].bits <= 8:
        return parts[31]
    return Op("concat", tuple(parts), 8 * (32 - lead))


# --- smart constructors -------------------------------------------------------------

def mk(op: str, *args: Expr) -> Expr:
    """Build ``op(args)`` with constant folding and local simplification."""
    if all(isinstance(a, Const) for a in args):
        if op == "sha3":
            return const(keccak_int(bytes(a.value for a in args)))
        if op == "concat":
            return concat(args)
        return const(_FOLD[op](*(a.value for a in args)))
    simp = _SIMPLIFY.get(op)
    if simp is not None:
        r = simp(*args)
        if r is not None:
            return r
    if op == "concat":
        return concat(args)
    return Op(op, tuple(args), 1 if op in BOOL_OPS else (8 if op == "byte" else 256))


def _c(e: Expr) -> int | None:
    return e.value if isinstance(e, Const) else None


def _s_and(a: Expr, b: Expr) -> Expr | None:
    if isinstance(a, Const):
        a, b = b, a
    m = _c(b)
    if m is None:
        return a if a == b else None
    if m == 0:
        return ZERO
    if a.bits <= m.bit_length() and m == (1 << m.bit_length()) - 1:
        return a
    if isinstance(a, Op) and a.op == "concat":
        mb = m.to_bytes(32, "big")
        if all(x in (0, 0xFF) for x in mb):
            parts = byte_parts(a)
            return concat([p if mb[i] else ZERO for i, p in enumerate(parts)])
    return None


def _s_or(a: Expr, b: Expr) -> Expr | None:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if a == b:
        return a
    return None


def _s_xor(a: Expr, b: Expr) -> Expr | None:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if a == b:
        return ZERO
    return None


def _s_add(a: Expr, b: Expr) -> Expr | None:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    # fold (x + c1) + c2
    if isinstance(a, Const):
        a, b = b, a
    if isinstance(b, Const) and isinstance(a, Op) and a.op == "add" and isinstance(a.args[1], Const):
        return mk("add", a.args[0], const(a.args[1].value + b.value))
    return None


def _s_sub(a: Expr, b: Expr) -> Expr | None:
    # sub(a, b) = a - b
    if b == ZERO:
        return a
    if a == b:
        return ZERO
    return None


def _s_mul(a: Expr, b: Expr) -> Expr | None:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return None


def _s_shr(s: Expr, x: Expr) -> Expr | None:
    k = _c(s)
    if k is None:
        return None
    if k == 0:
        return x
    if k >= 256 or x.bits <= k:
        return ZERO
    if k % 8 == 0 and isinstance(x, Op) and x.op == "concat":
        n = k // 8
        parts = byte_parts(x)
        return concat([ZERO] * n + parts[: 32 - n])
    return None


def _s_shl(s: Expr, x: Expr) -> Expr | None:
    k = _c(s)
    if k is None:
        return None
    if k == 0:
        return x
    if k >= 256:
        return ZERO
    if k % 8 == 0 and (isinstance(x, Op) and x.op == "concat" or x.bits <= 8):
        n = k // 8
        parts = byte_parts(x)
        return concat(parts[n:] + [ZERO] * n)
    return None


def _s_byte(i: Expr, x: Expr) -> Expr | None:
    k = _c(i)
    if k is None:
        return None
    if k >= 32:
        return ZERO
    if isinstance(x, Op) and x.op == "concat":
        return x.args[k]
    if x.bits <= 8 * (31 - k):
        return ZERO
    if k == 31 and x.bits <= 8:
        return x
    return None


def _s_iszero(a: Expr) -> Expr | None:
    if isinstance(a, Op) and a.op == "iszero" and a.args[0].bits == 1:
        return a.args[0]
    return None


def _s_eq(a: Expr, b: Expr) -> Expr | None:
    if a == b:
        return ONE
    if isinstance(a, Const):
        a, b = b, a
    c = _c(b)
    if c is None:
        return Op("eq", (a, b), 1)
    if c.bit_length() > a.bits:
        return ZERO
    if isinstance(a, Op) and a.op == "concat":
        cb = c.to_bytes(32, "big")
        for p, v in zip(a.args, cb):
            if isinstance(p, Const) and p.value != v:
                return ZERO
    if a.bits == 1 and c == 0:
        return mk("iszero", a)
    if a.bits == 1 and c == 1:
        return a
    return Op("eq", (a, b), 1)


def _s_not(a: Expr) -> Expr | None:
    if isinstance(a, Op) and a.op == "not":
        return a.args[0]
    return None


def _s_lt(a: Expr, b: Expr) -> Expr | None:
    if a == b:
        return ZERO
    cb = _c(b)
    if cb is not None and a.bits < 256 and cb > (1 << a.bits) - 1:
        return ONE
    if cb == 0:
        return ZERO
    return None


def _s_gt(a: Expr, b: Expr) -> Expr | None:
    if a == b:
        return ZERO
    cb = _c(b)
    if cb is not None and cb >= (1 << a.bits) - 1:
        return ZERO
    ca = _c(a)
    if ca == 0:
        return ZERO
    return None


_SIMPLIFY: dict[str, Callable[..., Expr | None]] = {
    "and": _s_and,
    "or": _s_or,
    "xor": _s_xor,
    "add": _s_add,
    "sub": _s_sub,
    "mul": _s_mul,
    "shr": _s_shr,
    "shl": _s_shl,
    "byte": _s_byte,
    "iszero": _s_iszero,
    "eq": _s_eq,
    "not": _s_not,
    "lt": _s_lt,
    "gt": _s_gt,
}


def truth(e: Expr) -> Expr:
    """Boolean form of "e is nonzero"."""
    if e.bits == 1:
        return e
    return mk("iszero", mk("iszero", e))


def negate(e: Expr) -> Expr:
    return mk("iszero", e)


# --- evaluation and substitution ------------------------------------------------------

def evaluate(e: Expr, env: Mapping[str, int], memo: dict | None = None) -> int:
    """Tree-walking evaluator; the reference semantics for model checks."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name] & ((1 << e.bits) - 1)
    if memo is None:
        memo = {}
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    vals = [evaluate(a, env, memo) for a in e.args]
    if e.op == "concat":
        r = 0
        for v in vals:
            r = (r << 8) | (v & 0xFF)
    elif e.op == "sha3":
        r = keccak_int(bytes(v & 0xFF for v in vals))
    else:
        r = _FOLD[e.op](*vals)
    memo[key] = r
    return r


def substitute(e: Expr, env: Mapping[str, int | Expr], memo: dict | None = None) -> Expr:
    """Replace variables by constants (or expressions) and re-fold."""
    if not e._vars or not (e._vars & env.keys()):
        return e
    if isinstance(e, Var):
        v = env[e.name]
        return v if isinstance(v, Expr) else const(v & ((1 << e.bits) - 1))
    if memo is None:
        memo = {}
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    args = [substitute(a, env, memo) for a in e.args]
    r = concat(args) if e.op == "concat" else mk(e.op, *args)
    memo[id(e)] = r
    return r


def to_str(e: Expr) -> str:
    if isinstance(e, Const):
        return hex(e.value) if e.value > 9 else str(e.value)
    if isinstance(e, Var):
        return e.name
    if e.op == "concat":
        parts = e.args
        lead = 0
        while lead < 31 and parts[lead] == ZERO:
            lead += 1
        return "concat(" + ", ".join(to_str(p) for p in parts[lead:]) + ")"
    return f"{e.op}(" + ", ".join(to_str(a) for a in e.args) + ")"


def compile_expr(e: Expr) -> Callable[[Mapping[str, int]], int]:
    """Compile to a Python closure over an environment dict (used for enumeration)."""
    lines: list[str] = []
    names: dict[int, str] = {}
    consts: dict[str, object] = {"_F": _FOLD, "_K": keccak_int}

    def emit(x: Expr) -> str:
        if isinstance(x, Const):
            return str(x.value)
        if isinstance(x, Var):
            return f"(env[{x.name!r}] & {(1 << x.bits) - 1})"
        k = id(x)
        if k in names:
            return names[k]
        args = [emit(a) for a in x.args]
        if x.op == "concat":
            terms = [f"({a} << {8 * (31 - i)})" for i, a in enumerate(args) if a != "0"]
            body = " | ".join(terms) if terms else "0"
        elif x.op == "sha3":
            body = "_K(bytes([" + ", ".join(f"({a}) & 255" for a in args) + "]))"
        elif x.op == "eq":
            body = f"int({args[0]} == {args[1]})"
        elif x.op == "iszero":
            body = f"int({args[0]} == 0)"
        elif x.op == "lt":
            body = f"int({args[0]} < {args[1]})"
        elif x.op == "gt":
            body = f"int({args[0]} > {args[1]})"
        elif x.op == "and":
            body = f"({args[0]} & {args[1]})"
        elif x.op == "or":
            body = f"({args[0]} | {args[1]})"
        elif x.op == "xor":
            body = f"({args[0]} ^ {args[1]})"
        elif x.op == "add":
            body = f"(({args[0]} + {args[1]}) & {UINT_MAX})"
        elif x.op == "sub":
            body = f"(({args[0]} - {args[1]}) & {UINT_MAX})"
        else:
            body = f"_F[{x.op!r}](" + ", ".join(args) + ")"
        name = f"t{len(names)}"
        names[k] = name
        lines.append(f"    {name} = {body}")
        return name

    out = emit(e)
    src = "def _f(env):\n" + "\n".join(lines) + ("\n" if lines else "") + f"    return {out}\n"
    ns: dict[str, object] = dict(consts)
    exec(src, ns)
    return ns["_f"]  # type: ignore[return-value]


def iter_nodes(e: Expr) -> Iterable[Expr]:
    seen: set[int] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        yield x
        if isinstance(x, Op):
            stack.extend(x.args)
