"""A small bit-vector constraint solver for path conditions.

Strategy: constant folding, equality propagation with back-substitution
(through concat / add / sub / xor / not / masks), hint probing, interval
narrowing for byte variables and bounded enumeration of small variable
groups. Anything beyond that is UNKNOWN. Every model is re-checked with the
tree-walking evaluator before it is returned.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from ..words import UINT_MAX
from .expr import Const, Expr, Op, Var, compile_expr, evaluate, iter_nodes, substitute

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"

ENUM_BUDGET = 1 << 18
MAX_ENUM_VARS = 4

SOLVER_STATS = {"calls": 0, "models": 0, "verified": 0, "unsat": 0, "unknown": 0}


class UnsoundModelError(AssertionError):
    pass


@dataclass
class SolveResult:
    status: str
    model: dict[str, int] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.status == SAT

    @property
    def sat(self) -> bool:
        return self.status == SAT


@dataclass
class _State:
    assign: dict[str, int] = field(default_factory=dict)
    bits: dict[str, int] = field(default_factory=dict)
    conflict: bool = False

    def bind(self, name: str, value: int) -> bool:
        if value >> self.bits.get(name, 256):
            self.conflict = True
            return False
        old = self.assign.get(name)
        if old is not None and old != value:
            self.conflict = True
            return False
        if old is None:
            self.assign[name] = value
            return True
        return False


def _solve_eq(x: Expr, k: int, st: _State) -> bool:
    """Derive variable bindings implied by ``x == k``; returns True if any were added."""
    k &= UINT_MAX
    if isinstance(x, Const):
        if x.value != k:
            st.conflict = True
        return False
    if isinstance(x, Var):
        return st.bind(x.name, k)
    op, args = x.op, x.args
    if op == "concat":
        kb = k.to_bytes(32, "big")
        changed = False
        for part, b in zip(args, kb):
            changed |= _solve_eq(part, b, st)
            if st.conflict:
                return False
        return changed
    if op in ("add", "xor"):
        a, b = args
        if isinstance(b, Const):
            a, b = b, a
        if isinstance(a, Const):
            return _solve_eq(b, (k - a.value) if op == "add" else (k ^ a.value), st)
        return False
    if op == "sub":
        a, b = args  # a - b
        if isinstance(b, Const):
            return _solve_eq(a, k + b.value, st)
        if isinstance(a, Const):
            return _solve_eq(b, a.value - k, st)
        return False
    if op == "not":
        return _solve_eq(args[0], k ^ UINT_MAX, st)
    if op == "iszero":
        if k == 1:
            return _solve_eq(args[0], 0, st)
        if k > 1:
            st.conflict = True
        return False
    if op == "eq":
        a, b = args
        if k > 1:
            st.conflict = True
            return False
        if k == 1:
            if isinstance(b, Const):
                return _solve_eq(a, b.value, st)
            if isinstance(a, Const):
                return _solve_eq(b, a.value, st)
        return False
    if op == "and":
        a, b = args
        if isinstance(a, Const):
            a, b = b, a
        if isinstance(b, Const) and isinstance(a, Op) and a.op == "concat":
            mb = b.value.to_bytes(32, "big")
            kb = k.to_bytes(32, "big")
            changed = False
            for part, m, v in zip(a.args, mb, kb):
                if v & ~m & 0xFF:
                    st.conflict = True
                    return False
                if m == 0xFF:
                    changed |= _solve_eq(part, v, st)
                    if st.conflict:
                        return False
            return changed
        if isinstance(b, Const) and k & ~b.value:
            st.conflict = True
        return False
    if x.bits < 256 and k >> x.bits:
        st.conflict = True
    return False


def _constraint_eq(c: Expr, st: _State) -> bool:
    """Bindings implied by the constraint ``c != 0``."""
    if isinstance(c, Op):
        if c.op == "eq":
            return _solve_eq(c, 1, st)
        if c.op == "iszero":
            return _solve_eq(c.args[0], 0, st)
    if isinstance(c, Var) and c.bits == 1:
        return st.bind(c.name, 1)
    return False


def _byte_interval(c: Expr) -> tuple[str, int, int] | None:
    """(var, lo, hi) for direct comparisons of a byte variable with a constant."""
    neg = False
    if isinstance(c, Op) and c.op == "iszero" and isinstance(c.args[0], Op):
        c, neg = c.args[0], True
    if not isinstance(c, Op) or c.op not in ("lt", "gt"):
        return None
    a, b = c.args
    op = c.op
    if isinstance(a, Const) and isinstance(b, Var):
        a, b = b, a
        op = "gt" if op == "lt" else "lt"
    if not (isinstance(a, Var) and isinstance(b, Const) and a.bits <= 8):
        return None
    top = (1 << a.bits) - 1
    v = b.value
    if op == "lt":  # a < v
        lo, hi = (0, v - 1) if not neg else (v, top)
    else:  # a > v
        lo, hi = (v + 1, top) if not neg else (0, v)
    return a.name, max(lo, 0), min(hi, top)


def _groups(cons: list[Expr]) -> list[tuple[list[Expr], list[str]]]:
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in cons:
        vs = sorted(c._vars)
        for v in vs:
            parent.setdefault(v, v)
        for v in vs[1:]:
            ra, rb = find(vs[0]), find(v)
            if ra != rb:
                parent[rb] = ra
    buckets: dict[str, list[Expr]] = {}
    for c in cons:
        buckets.setdefault(find(min(c._vars)), []).append(c)
    out = []
    for root in sorted(buckets):
        cs = buckets[root]
        vs = sorted(set().union(*(c._vars for c in cs)))
        out.append((cs, vs))
    return out


def _check(cons: Iterable[Expr], env: Mapping[str, int]) -> bool:
    memo: dict = {}
    return all(evaluate(c, env, memo) != 0 for c in cons)


def _var_bits(constraints: Iterable[Expr]) -> dict[str, int]:
    bits: dict[str, int] = {}
    for c in constraints:
        for n in iter_nodes(c):
            if isinstance(n, Var):
                bits[n.name] = n.bits
    return bits


def solve(
    constraints: Iterable[Expr],
    pins: Mapping[str, int] | None = None,
    hints: Mapping[str, int] | None = None,
    budget: int = ENUM_BUDGET,
) -> SolveResult:
    """Find values for the free variables making every constraint nonzero.

    ``pins`` fix variables up front; ``hints`` are preferred values tried
    first. The returned model covers every variable of the constraints that
    is not pinned.
    """
    SOLVER_STATS["calls"] += 1
    original = list(constraints)
    pins = dict(pins or {})
    hints = dict(hints or {})
    res = _solve(original, pins, hints, budget)
    if res.status == SAT:
        env = {**pins, **res.model}
        if not _check(original, env):
            raise UnsoundModelError(f"model {res.model} violates the constraints")
        SOLVER_STATS["models"] += 1
        SOLVER_STATS["verified"] += 1
    elif res.status == UNSAT:
        SOLVER_STATS["unsat"] += 1
    else:
        SOLVER_STATS["unknown"] += 1
    return res


def _solve(original: list[Expr], pins: dict[str, int], hints: dict[str, int], budget: int) -> SolveResult:
    st = _State(bits=_var_bits(original))
    all_vars = set(st.bits) - set(pins)
    cons = [substitute(c, pins) for c in original] if pins else list(original)
    # propagate equalities to a fixpoint
    while True:
        live = []
        for c in cons:
            if isinstance(c, Const):
                if c.value == 0:
                    return SolveResult(UNSAT, reason="constraint folds to false")
                continue
            live.append(c)
        cons = live
        changed = False
        for c in cons:
            changed |= _constraint_eq(c, st)
            if st.conflict:
                return SolveResult(UNSAT, reason="conflicting equalities")
        if not changed:
            break
        memo: dict = {}
        cons = [substitute(c, st.assign, memo) for c in cons]
    model = dict(st.assign)
    incomplete = False
    for group, names in _groups(cons):
        found = _solve_group(group, names, st.bits, hints, budget)
        if found.status != SAT:
            if found.status == UNSAT:
                return found
            incomplete = True
            continue
        model.update(found.model)
    if incomplete:
        return SolveResult(UNKNOWN, reason="search space beyond enumeration budget")
    for name in sorted(all_vars - model.keys()):
        model[name] = hints.get(name, 0) & ((1 << st.bits[name]) - 1)
    return SolveResult(SAT, model)


def _solve_group(cons: list[Expr], names: list[str], bits: dict[str, int],
                 hints: Mapping[str, int], budget: int) -> SolveResult:
    # hint probe
    env = {n: hints.get(n, 0) & ((1 << bits[n]) - 1) for n in names}
    if _check(cons, env):
        return SolveResult(SAT, env)
    # interval narrowing for byte variables
    lo = {n: 0 for n in names}
    hi = {n: (1 << bits[n]) - 1 for n in names}
    for c in cons:
        iv = _byte_interval(c)
        if iv is not None:
            n, a, b = iv
            lo[n], hi[n] = max(lo[n], a), min(hi[n], b)
            if lo[n] > hi[n]:
                return SolveResult(UNSAT, reason=f"empty interval for {n}")
    if len(names) > MAX_ENUM_VARS:
        return SolveResult(UNKNOWN, reason=f"{len(names)} free variables")
    exact = True
    domains: list[list[int]] = []
    size = 1
    for n in names:
        if bits[n] <= 8:
            dom = list(range(lo[n], hi[n] + 1))
        else:
            exact = False
            dom = _candidates(cons, n, bits[n], hints)
        h = hints.get(n)
        if h is not None and h in dom:
            dom.remove(h)
            dom.insert(0, h)
        domains.append(dom)
        size *= len(dom)
    if size > budget:
        return SolveResult(UNKNOWN, reason=f"enumeration space {size} over budget")
    fns = [compile_expr(c) for c in cons]
    for combo in itertools.product(*domains):
        env = dict(zip(names, combo))
        if all(f(env) for f in fns):
            return SolveResult(SAT, env)
    if exact:
        return SolveResult(UNSAT, reason="exhaustive enumeration")
    return SolveResult(UNKNOWN, reason="candidate values exhausted")


def _candidates(cons: list[Expr], name: str, bits: int, hints: Mapping[str, int]) -> list[int]:
    mask = (1 << bits) - 1
    vals = {0, 1, mask, hints.get(name, 0) & mask}
    for c in cons:
        for n in iter_nodes(c):
            if isinstance(n, Const):
                for d in (-1, 0, 1):
                    vals.add((n.value + d) & mask)
    return sorted(vals)
