"""Iterative global value numbering over phi-lowered SSA programs.

Partitions flow forward through the CFG.  At a join block the two incoming
partitions are intersected class by class; a class whose members came from
differently numbered classes is annotated with a value phi-function
``phi.k(vi, vj)``.  Different value expressions are not merged at the join.
Instead, when an expression over annotated operands is later computed, the
transfer function pushes the operator through the annotations into the
predecessors and looks the pieces up there.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .ir import BinOp, Program, Statement, lower_phis, reverse_postorder
from .partition import (
    TOP,
    Allocator,
    Class,
    Operand,
    Partition,
    PartitionLike,
    ValueExpression,
    ValueNumber,
    ValuePhiFunction,
    canonical,
    intersect_classes,
    value_expr,
)

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    pass


@dataclass
class AnalysisState:
    program: Program
    allocator: Allocator
    pin: dict[int, PartitionLike] = field(default_factory=dict)
    pout: dict[int, PartitionLike] = field(default_factory=dict)
    block_in: dict[str, PartitionLike] = field(default_factory=dict)
    block_out: dict[str, PartitionLike] = field(default_factory=dict)
    iterations: int = 0
    max_vpf_depth: int = 0


def join(p1: PartitionLike, p2: PartitionLike, k: str, a: Allocator) -> PartitionLike:
    if p1 is TOP:
        return p2
    if p2 is TOP:
        return p1
    out = Partition()
    for c1 in p1:
        # only classes sharing at least one member can intersect
        partners = {c.vn: c for c in (
            *(p2.class_of_var(v) for v in c1.vars),
            *(p2.class_of_const(v) for v in c1.consts),
            *(p2.class_of_expr(e) for e in c1.exprs),
        ) if c is not None}
        for vn in sorted(partners):
            c = intersect_classes(c1, partners[vn], k, a)
            if c is not None:
                out.add(c)
    return out


# -- value phi-functions -----------------------------------------------------

def _pred_outs(st: AnalysisState, k: str):
    preds = st.program.block(k).preds
    if len(preds) != 2:
        return None
    left, right = (st.block_out.get(b, TOP) for b in preds)
    if left is TOP or right is TOP:
        return None
    return left, right


def _split(o: Operand, k: str, part: Partition, sides, a: Allocator):
    """The (left, right) operands ``o`` stands for across join block ``k``."""
    if isinstance(o, ValuePhiFunction):
        return (o.left, o.right) if o.block == k else None
    c = part.get(o)
    if c is not None and c.vpf is not None and c.vpf.block == k:
        return c.vpf.left, c.vpf.right
    # a value number present on both sides of k denotes the same value on both
    if a.is_global(o) or (o in sides[0] and o in sides[1]):
        return o, o
    return None


def _candidates(operands, part: Partition) -> list[str]:
    blocks = []
    for o in operands:
        if isinstance(o, ValuePhiFunction):
            b = o.block
        else:
            c = part.get(o)
            b = c.vpf.block if c is not None and c.vpf is not None else None
        if b is not None and b not in blocks:
            blocks.append(b)
    return blocks


def _decompose(op, left: Operand, right: Operand, part: Partition, st: AnalysisState,
               visited: set, depth: int) -> ValuePhiFunction | None:
    key = (op, left, right, id(part))
    if key in visited:
        return None
    visited.add(key)
    for k in _candidates((left, right), part):
        sides = _pred_outs(st, k)
        if sides is None:
            continue
        ls = _split(left, k, part, sides, st.allocator)
        rs = _split(right, k, part, sides, st.allocator)
        if ls is None or rs is None:
            continue
        lval = _apply(op, ls[0], rs[0], sides[0], st, visited, depth + 1)
        if lval is None:
            continue
        rval = _apply(op, ls[1], rs[1], sides[1], st, visited, depth + 1)
        if rval is None:
            continue
        st.max_vpf_depth = max(st.max_vpf_depth, depth + 1)
        return ValuePhiFunction(k, lval, rval)
    return None


def _apply(op, left: Operand, right: Operand, part: Partition, st: AnalysisState,
           visited: set, depth: int) -> Operand | None:
    """The value of ``left op right`` at ``part`` if it was computed on every path."""
    if not isinstance(left, ValuePhiFunction) and not isinstance(right, ValuePhiFunction):
        c = part.class_of_expr(ValueExpression(op, left, right))
        if c is not None:
            return c.vn
    vpf = _decompose(op, left, right, part, st, visited, depth)
    if vpf is None:
        return None
    c = find_vpf_class(part, vpf, st.allocator)
    return vpf if c is None else c.vn


def find_vpf_class(p: Partition, vpf: ValuePhiFunction, a: Allocator) -> Class | None:
    c = p.class_with_vpf(vpf)
    if c is not None:
        return c
    if isinstance(vpf.left, ValueNumber) and vpf.left == vpf.right:
        return p.get(vpf.left)
    return None


def value_phi_func(ve: ValueExpression, p: Partition, st: AnalysisState) -> ValuePhiFunction | None:
    """Express ``ve`` as a merge at some join block, or None if it is not one.

    For ``vl op vr`` with ``vl`` annotated ``phi.k(a, b)`` and ``vr``
    annotated ``phi.k(c, d)``, the result is ``phi.k(a op c, b op d)`` where
    each side is looked up (recursively) at the out point of the matching
    predecessor of ``k``.  An operand whose value number is live on both
    sides of ``k`` stands for itself on both sides.
    """
    return _decompose(ve.op, ve.left, ve.right, p, st, set(), 0)


# -- transfer ----------------------------------------------------------------

def transfer(s: Statement, pin: PartitionLike, st: AnalysisState) -> PartitionLike:
    if pin is TOP:
        return TOP
    a = st.allocator
    pout = pin.copy()
    x = s.target
    if isinstance(s.rhs, BinOp):
        ve = value_expr(s.rhs, pout, a)
        vpf = value_phi_func(ve, pout, st)
        pout.remove_var(x)
        c = pout.class_of_expr(ve)
        if c is None and vpf is not None:
            c = find_vpf_class(pout, vpf, a)
        if c is not None:
            pout.put(c.add(var=x, expr=ve))
        else:
            vn = a.fresh(("stmt", s.id))
            pout.add(Class(vn, frozenset([x]), exprs=frozenset([ve]), vpf=vpf))
        return pout
    vn = value_expr(s.rhs, pout, a)
    pout.remove_var(x)
    c = pout.get(vn)
    pout.put(Class(vn, frozenset([x])) if c is None else c.add(var=x))
    return pout


def run_fixpoint(p: Program, max_sweeps: int | None = None) -> AnalysisState:
    """Sweep blocks in reverse postorder until no block's out partition changes."""
    st = AnalysisState(p, Allocator(inputs=p.inputs))
    order = reverse_postorder(p)
    cap = max_sweeps if max_sweeps is not None else len(p.blocks) + 2
    st.block_out = {b.id: TOP for b in p.blocks}
    for sweep in range(1, cap + 1):
        changed = False
        for bid in order:
            block = p.block(bid)
            if bid == p.entry_id:
                cur: PartitionLike = Partition()
            elif len(block.preds) == 1:
                cur = st.block_out[block.preds[0]]
            else:
                cur = join(st.block_out[block.preds[0]], st.block_out[block.preds[1]],
                           bid, st.allocator)
            st.block_in[bid] = cur
            for s in block.stmts:
                st.pin[s.id] = cur
                cur = transfer(s, cur, st)
                st.pout[s.id] = cur
            if canonical(cur) != canonical(st.block_out[bid]):
                changed = True
            st.block_out[bid] = cur
        st.iterations = sweep
        log.debug("sweep %d changed=%s", sweep, changed)
        if not changed:
            return st
    raise NonConvergence(f"no fixpoint after {cap} sweeps")


# -- redundancy --------------------------------------------------------------

@dataclass(frozen=True)
class EquivalentVariable:
    name: str


@dataclass(frozen=True)
class ValuePhiWitness:
    vpf: ValuePhiFunction


@dataclass(frozen=True)
class Redundancy:
    stmt: int
    block: str
    text: str
    reason: EquivalentVariable | ValuePhiWitness


@dataclass
class RedundancyReport:
    entries: list[Redundancy] = field(default_factory=list)

    def stmt_ids(self) -> set[int]:
        return {e.stmt for e in self.entries}

    def __len__(self):
        return len(self.entries)


def detect_redundancies(p: Program, st: AnalysisState) -> RedundancyReport:
    report = RedundancyReport()
    for b, s in p.statements():
        if not isinstance(s.rhs, BinOp):
            continue
        pout = st.pout.get(s.id, TOP)
        if pout is TOP:
            continue
        c = pout.class_of_var(s.target)
        others = c.vars - {s.target}
        if others:
            reason = EquivalentVariable(min(others))
        elif c.vpf is not None:
            reason = ValuePhiWitness(c.vpf)
        else:
            continue
        report.entries.append(Redundancy(s.id, b.id, str(s), reason))
    return report


def analyze(p: Program, max_sweeps: int | None = None) -> tuple[AnalysisState, RedundancyReport]:
    """Lower phis, run to a fixpoint and detect redundancies."""
    lowered = lower_phis(p)
    st = run_fixpoint(lowered, max_sweeps)
    return st, detect_redundancies(lowered, st)
