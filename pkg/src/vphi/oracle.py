"""Brute-force Herbrand equivalence by path enumeration.

Every entry-to-point path (each back edge taken at most ``unroll`` times) is
executed symbolically, binding each variable to an uninterpreted term.  Two
expressions are equivalent at a point iff their terms agree on every path;
a statement is redundant iff on every path some earlier binary operation
produced the same term.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import combinations
from typing import Union

from .analysis import analyze
from .ir import (
    BinOp, Const, Phi, Program, Rhs, Var, back_edges, is_acyclic, lower_phis, validate_ssa,
)

DEFAULT_PATH_CAP = 4096
DEFAULT_UNROLL = 3


class PathCapExceeded(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class Leaf:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ConstLeaf:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Node:
    op: str
    left: "HerbrandTerm"
    right: "HerbrandTerm"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


HerbrandTerm = Union[Leaf, ConstLeaf, Node]


@dataclass
class PathEnv:
    path: tuple[str, ...]
    bindings: dict[str, HerbrandTerm] = field(default_factory=dict)
    computed: list[tuple[int, HerbrandTerm]] = field(default_factory=list)


def path_cap() -> int:
    return int(os.environ.get("VPHI_PATH_CAP", DEFAULT_PATH_CAP))


def herbrand_term(env: PathEnv, rhs: Rhs, program: Program | None = None) -> HerbrandTerm:
    if isinstance(rhs, Const):
        return ConstLeaf(rhs.value)
    if isinstance(rhs, Var):
        t = env.bindings.get(rhs.name)
        if t is None:
            if program is not None and rhs.name in program.defined:
                raise OracleError(f"{rhs.name} is not defined on path {'->'.join(env.path)}")
            return Leaf(rhs.name)
        return t
    if isinstance(rhs, BinOp):
        return Node(rhs.op, herbrand_term(env, rhs.left, program),
                    herbrand_term(env, rhs.right, program))
    if isinstance(rhs, Phi):
        raise OracleError("phi must be lowered before term evaluation")
    raise TypeError(rhs)


def _walks(p: Program, target: str, unroll: int, cap: int) -> list[tuple[str, ...]]:
    """All entry-to-``target`` block walks, each back edge taken <= unroll times."""
    succ = p.successors
    back = back_edges(p)
    # prune successors that cannot reach target
    reaches = {target}
    changed = True
    while changed:
        changed = False
        for b in p.blocks:
            if b.id not in reaches and any(n in reaches for n in succ[b.id]):
                reaches.add(b.id)
                changed = True

    found: list[tuple[str, ...]] = []
    counts = {e: 0 for e in back}
    path: list[str] = []

    def visit(b: str):
        path.append(b)
        if b == target:
            found.append(tuple(path))
            if len(found) > cap:
                raise PathCapExceeded(f"more than {cap} paths to {target}")
        for n in succ[b]:
            if n not in reaches:
                continue
            e = (b, n)
            if e in counts:
                if counts[e] >= unroll:
                    continue
                counts[e] += 1
                visit(n)
                counts[e] -= 1
            else:
                visit(n)
        path.pop()

    if p.entry_id in reaches:
        visit(p.entry_id)
    return found


def _execute(p: Program, path: tuple[str, ...], stop_at: int | None = None) -> PathEnv:
    env = PathEnv(path)
    for i, bid in enumerate(path):
        last = i == len(path) - 1
        for s in p.block(bid).stmts:
            if last and s.id == stop_at:
                return env
            t = herbrand_term(env, s.rhs, p)
            if isinstance(s.rhs, BinOp):
                env.computed.append((s.id, t))
            env.bindings[s.target] = t
    return env


def enumerate_paths(p: Program, target: int | str, unroll: int = DEFAULT_UNROLL,
                    cap: int | None = None) -> list[PathEnv]:
    """Evaluated environments at ``target``.

    An integer target is a statement id (environment at its in point); a
    string is a block id (environment at the block's out point).
    """
    if unroll < 0:
        raise ValueError("unroll must be >= 0")
    cap = path_cap() if cap is None else cap
    if isinstance(target, int):
        block, stop = p.block_of(target).id, target
    else:
        block, stop = target, None
    return [_execute(p, w, stop) for w in _walks(p, block, unroll, cap)]


def oracle_equivalent(p: Program, point: int | str, e1: Rhs, e2: Rhs,
                      unroll: int = DEFAULT_UNROLL, cap: int | None = None) -> bool:
    return all(herbrand_term(env, e1, p) == herbrand_term(env, e2, p)
               for env in enumerate_paths(p, point, unroll, cap))


def oracle_redundant(p: Program, s: int, unroll: int = DEFAULT_UNROLL,
                     cap: int | None = None) -> bool:
    rhs = p.statement(s).rhs
    if not isinstance(rhs, BinOp):
        raise ValueError(f"statement {s} is not a binary operation")
    for env in enumerate_paths(p, s, unroll, cap):
        t = herbrand_term(env, rhs, p)
        if not any(u == t for _, u in env.computed):
            return False
    return True


def _held(p: Program, block: str, upto: int, want: dict[tuple, HerbrandTerm]) -> bool:
    envs = [_execute_prefix(p, w, upto) for w in want]
    names = set.intersection(*(set(e.bindings) for e in envs))
    if any(all(e.bindings[y] == want[e.path] for e in envs) for y in names):
        return True
    if upto > 0:
        return _held(p, block, upto - 1, want)
    if block == p.entry_id:
        return False
    by_pred: dict[str, dict] = {}
    for w, t in want.items():
        by_pred.setdefault(w[-2], {})[w[:-1]] = t
    return all(_held(p, pred, len(p.block(pred).stmts), sub) for pred, sub in by_pred.items())


def _execute_prefix(p: Program, path: tuple[str, ...], upto: int) -> PathEnv:
    env = _execute(p, path[:-1])
    env.path = path
    for s in p.block(path[-1]).stmts[:upto]:
        t = herbrand_term(env, s.rhs, p)
        if isinstance(s.rhs, BinOp):
            env.computed.append((s.id, t))
        env.bindings[s.target] = t
    return env


def oracle_merge_redundant(p: Program, s: int, unroll: int = DEFAULT_UNROLL,
                           cap: int | None = None) -> bool:
    """True iff at ``s`` the value of its expression is held by a variable, or
    by a merge over the incoming edges of values held at the predecessors.

    This is stricter than ``oracle_redundant``: a value that one path got
    before a join and the other path got only after it is not held by
    anything a phi could select.
    """
    rhs = p.statement(s).rhs
    if not isinstance(rhs, BinOp):
        raise ValueError(f"statement {s} is not a binary operation")
    block = p.block_of(s)
    idx = [x.id for x in block.stmts].index(s)
    want = {env.path: herbrand_term(env, rhs, p) for env in enumerate_paths(p, s, unroll, cap)}
    return bool(want) and _held(p, block.id, idx, want)


def defined_everywhere(envs: list[PathEnv]) -> set[str]:
    if not envs:
        return set()
    return set.intersection(*(set(e.bindings) for e in envs))


@dataclass(frozen=True)
class Mismatch:
    kind: str
    data: tuple

    def data_dict(self) -> dict:
        return dict(self.data)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.data_dict()}


def differential_check(p: Program, unroll: int = DEFAULT_UNROLL, exact: bool | None = None,
                       cap: int | None = None) -> list[Mismatch]:
    """Compare the analysis against the oracle.

    ``exact`` (default: program is acyclic) requires agreement in both
    directions; otherwise only analysis-implies-oracle is checked.
    """
    report = validate_ssa(p)
    if report:
        raise ValueError("program is not valid SSA: " + "; ".join(map(str, report.errors)))
    lowered = lower_phis(p)
    if exact is None:
        exact = is_acyclic(lowered)
    st, red = analyze(lowered)
    flagged = red.stmt_ids()
    out: list[Mismatch] = []

    for b, s in lowered.statements():
        if not isinstance(s.rhs, BinOp):
            continue
        a = s.id in flagged
        o = oracle_redundant(lowered, s.id, unroll, cap)
        if a != o and (exact or a):
            merged = oracle_merge_redundant(lowered, s.id, unroll, cap)
            out.append(Mismatch("redundancy-mismatch", (
                ("stmt", s.id), ("block", b.id), ("text", str(s)), ("analysis", a), ("oracle", o),
                ("path_sensitive", o and not merged))))

    for b in lowered.blocks:
        envs = enumerate_paths(lowered, b.id, unroll, cap)
        part = st.block_out[b.id]
        names = defined_everywhere(envs)
        avars = part.variables() - lowered.inputs
        if exact:
            for v in sorted(names - avars):
                out.append(Mismatch("missing-variable", (("block", b.id), ("var", v))))
        for v in sorted(avars - names):
            out.append(Mismatch("spurious-variable", (("block", b.id), ("var", v))))
        signature = {v: tuple(e.bindings[v] for e in envs) for v in names}
        for x, y in combinations(sorted(names & avars), 2):
            a = part.class_of_var(x).vn == part.class_of_var(y).vn
            o = signature[x] == signature[y]
            if a != o and (exact or a):
                out.append(Mismatch("equivalence-mismatch", (
                    ("block", b.id), ("vars", (x, y)), ("analysis", a), ("oracle", o))))
    return out
