import pytest

from vphi.analysis import (
    AnalysisState, EquivalentVariable, NonConvergence, ValuePhiWitness, analyze, join,
    run_fixpoint, transfer, value_phi_func,
)
from vphi.ir import lower_phis, parse_program
from vphi.oracle import oracle_redundant
from vphi.partition import (
    TOP, Allocator, ValueExpression, ValueNumber, ValuePhiFunction, isomorphic, parse_partition,
)

from conftest import load

V = ValueNumber
P1 = "{v1, x1, x3 | v2, y1, y3, v1+1 | v3, z1, z3}"
P2 = "{v4, x2, x3 | v5, y2, y3 | v6, z2, z3, v4+1}"
P3 = "{v7, x3 : phi.B3(v1,v4) | v8, y3 : phi.B3(v2,v5) | v9, z3 : phi.B3(v3,v6)}"
FIXED = range(1, 7)


def test_join_worked_example():
    a = Allocator()
    p1, p2 = parse_partition(P1, a), parse_partition(P2, a)
    got = join(p1, p2, "B3", a)
    assert isomorphic(got, parse_partition(P3), fixed=FIXED)


def test_join_with_top_is_identity():
    a = Allocator()
    p1 = parse_partition(P1, a)
    assert join(TOP, p1, "B", a) is p1
    assert join(p1, TOP, "B", a) is p1
    assert join(TOP, TOP, "B", a) is TOP


def test_join_idempotent():
    a = Allocator()
    p1 = parse_partition(P1, a)
    assert join(p1, p1, "B", a) == p1


def diamond_join_state():
    """E1 lowered, with the predecessor outs of B3 filled in by hand."""
    p = lower_phis(load("e1.ir"))
    a = Allocator(inputs=p.inputs)
    st = AnalysisState(p, a)
    st.block_out["B1"] = parse_partition("{v1, x1, x3 | v2, y1, y3 | v3, p1, v1+v2}", a)
    st.block_out["B2"] = parse_partition("{v4, x2, x3 | v5, y2, y3 | v6, q2, v4+v5}", a)
    pin = join(st.block_out["B1"], st.block_out["B2"], "B3", a)
    return p, st, pin


def test_transfer_worked_example():
    p, st, pin = diamond_join_state()
    assert isomorphic(pin, parse_partition("{v7, x3 : phi.B3(v1,v4) | v8, y3 : phi.B3(v2,v5)}"),
                      fixed=FIXED)
    w3 = p.block("B3").stmts[0]
    pout = transfer(w3, pin, st)
    want = parse_partition(
        "{v7, x3 : phi.B3(v1,v4) | v8, y3 : phi.B3(v2,v5) | v9, w3, v7+v8 : phi.B3(v3,v6)}")
    assert isomorphic(pout, want, fixed=FIXED)
    assert pout.class_of_var("w3").vpf == ValuePhiFunction("B3", V(3), V(6))
    # incoming classes pass through untouched
    for c in pin:
        assert pout.get(c.vn) == c


def test_value_phi_func_chain():
    p, st, pin = diamond_join_state()
    vx, vy = pin.class_of_var("x3").vn, pin.class_of_var("y3").vn
    assert value_phi_func(ValueExpression("+", vx, vy), pin, st) == ValuePhiFunction("B3", V(3), V(6))
    # not computed on either side
    assert value_phi_func(ValueExpression("*", vx, vy), pin, st) is None


def test_value_phi_func_without_annotations():
    _, st, _ = diamond_join_state()
    b1 = st.block_out["B1"]
    assert value_phi_func(ValueExpression("*", V(1), V(2)), b1, st) is None


TWO_JOINS = """
block entry:
block A:
  preds: entry
block B:
  preds: entry
block J1:
  preds: A, B
  x = phi(a, b)
block C:
  preds: J1
block D:
  preds: J1
block J2:
  preds: C, D
  y = phi(a, b)
  w = x + y
block exit:
  preds: J2
"""


def test_value_phi_func_annotations_at_different_joins():
    p = parse_program(TWO_JOINS)
    st, rep = analyze(p)
    w = next(s for _, s in st.program.statements() if s.target == "w")
    pin = st.pin[w.id]
    vx, vy = pin.class_of_var("x").vn, pin.class_of_var("y").vn
    assert pin.class_of_var("x").vpf.block == "J1"
    assert pin.class_of_var("y").vpf.block == "J2"
    assert value_phi_func(ValueExpression("+", vx, vy), pin, st) is None
    assert w.id not in rep.stmt_ids()
    assert not oracle_redundant(st.program, w.id)


def test_copy_joins_source_class():
    p = parse_program("block entry:\nblock B:\n  preds: entry\n  z1 = x1\nblock exit:\n  preds: B\n")
    a = Allocator()
    st = AnalysisState(p, a)
    pin = parse_partition("{v1, x1}", a)
    out = transfer(p.block("B").stmts[0], pin, st)
    assert out == parse_partition("{v1, x1, z1}")
    assert transfer(p.block("B").stmts[0], TOP, st) is TOP


def test_straight_line_redundancy():
    st, rep = analyze(load("straight.ir"))
    assert [(e.text, e.reason) for e in rep.entries] == [("d1 = a1 + b1", EquivalentVariable("e1"))]
    assert st.iterations == 2


def test_e1_detection():
    st, rep = analyze(load("e1.ir"))
    assert [e.text for e in rep.entries] == ["w3 = x3 + y3"]
    reason = rep.entries[0].reason
    assert isinstance(reason, ValuePhiWitness)
    b1, b2 = st.block_out["B1"], st.block_out["B2"]
    assert reason.vpf == ValuePhiFunction("B3", b1.class_of_var("p1").vn, b2.class_of_var("q2").vn)
    assert st.iterations <= 2
    want = parse_partition(
        "{v7, x3 : phi.B3(v1,v4) | v8, y3 : phi.B3(v2,v5) | v9, w3, v7+v8 : phi.B3(v3,v6)}")
    w3 = st.program.block("B3").stmts[0]
    assert isomorphic(st.pout[w3.id], want)


def test_e1_mutated_not_detected():
    _, rep = analyze(load("e1_mul.ir"))
    assert len(rep) == 0


def test_variable_witness_preferred():
    src = """
block entry:
block B1:
  preds: entry
  p1 = x1 + y1
block B2:
  preds: entry
  q2 = x2 + y2
block B3:
  preds: B1, B2
  x3 = phi(x1, x2)
  y3 = phi(y1, y2)
  w3 = x3 + y3
  u3 = x3 + y3
block exit:
  preds: B3
"""
    _, rep = analyze(parse_program(src))
    by_text = {e.text: e.reason for e in rep.entries}
    assert isinstance(by_text["w3 = x3 + y3"], ValuePhiWitness)
    assert by_text["u3 = x3 + y3"] == EquivalentVariable("w3")


def test_e2_loop():
    st, rep = analyze(load("e2.ir"))
    assert st.iterations <= len(st.program.blocks) + 2
    c = st.block_in["L"].class_of_var("i2")
    assert c.vpf is not None and c.vpf.block == "H"
    assert len(rep) == 0


def test_nonconvergence_is_reported():
    with pytest.raises(NonConvergence):
        run_fixpoint(lower_phis(load("e2.ir")), max_sweeps=1)


def test_empty_program():
    st, rep = analyze(load("empty.ir"))
    assert len(rep) == 0
    assert st.iterations == 2
