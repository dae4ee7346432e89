import json

import pytest

from vphi.ir import Const, Var
from vphi.partition import (
    TOP, Allocator, Class, Partition, PartitionError, ValueExpression, ValueNumber,
    ValuePhiFunction, canonical, dense_numbering, from_json, intersect_classes, isomorphic,
    lookup_operand, normalize, parse_partition, rename, render, to_json, value_expr,
)

V = ValueNumber
P1 = "{v1, x1, x3 | v2, y1, y3, v1+1 | v3, z1, z3}"
P2 = "{v4, x2, x3 | v5, y2, y3 | v6, z2, z3, v4+1}"


def test_allocator_memoizes():
    a = Allocator()
    assert a.fresh(("const", 5)) == a.fresh(("const", 5))
    x, y = a.fresh(("input", "x1")), a.fresh(("input", "y1"))
    assert x != y
    assert a.kind(x) == "input"
    assert a.is_global(a.fresh(("const", 5)))
    assert a.const_value(a.fresh(("const", 5))) == 5


def test_allocator_reserve_skips_numbers():
    a = Allocator()
    a.reserve(6)
    assert a.fresh(("join", "B3", 1)) == V(7)


def test_lookup_operand_in_p1():
    a = Allocator()
    p = parse_partition(P1, a)
    assert lookup_operand(p, Var("x1"), a) == V(1)


def test_lookup_operand_introduces_constant():
    a = Allocator()
    p = Partition()
    vn = lookup_operand(p, Const(7), a)
    assert p.class_of_const(7).vn == vn


def test_lookup_operand_introduces_input():
    a = Allocator(inputs={"q9"})
    p = Partition()
    vn = lookup_operand(p, Var("q9"), a)
    assert p.class_of_var("q9").vn == vn
    with pytest.raises(PartitionError):
        lookup_operand(p, Var("nope"), a)


def test_value_expr():
    a = Allocator()
    pin = parse_partition("{v7, x3 : phi(v1,v4) | v8, y3 : phi(v2,v5) | v9, z3 : phi(v3,v6)}", a)
    from vphi.ir import BinOp
    assert value_expr(BinOp("+", Var("x3"), Var("y3")), pin, a) == ValueExpression("+", V(7), V(8))
    assert value_expr(Var("x3"), pin, a) == V(7)
    assert value_expr(Const(5), Partition(), a) == a.fresh(("const", 5))


def test_intersect_shared_variable():
    a = Allocator()
    a.reserve(6)
    c = intersect_classes(Class(V(1), frozenset({"x1", "x3"})), Class(V(4), frozenset({"x2", "x3"})), "B", a)
    assert c.vars == {"x3"}
    assert c.vpf == ValuePhiFunction("B", V(1), V(4))
    assert c.vn == V(7)


def test_intersect_distinct_expressions_is_empty():
    a = Allocator()
    one = a.fresh(("const", 1))
    c1 = Class(V(2), frozenset({"y1", "y3"}), exprs=frozenset({ValueExpression("+", V(1), one)}))
    c2 = Class(V(6), frozenset({"z2", "z3"}), exprs=frozenset({ValueExpression("+", V(4), one)}))
    assert intersect_classes(c1, c2, "B", a) is None


def test_intersect_same_vn():
    a = Allocator()
    c = Class(V(1), frozenset({"x"}), vpf=ValuePhiFunction("B", V(2), V(3)))
    assert intersect_classes(c, c, "B", a) == c
    other = Class(V(1), frozenset({"x"}), vpf=ValuePhiFunction("B", V(2), V(4)))
    assert intersect_classes(c, other, "B", a).vpf is None


def test_class_rejects_two_constants():
    with pytest.raises(PartitionError):
        Class(V(1), consts=frozenset({1, 2}))


def test_partition_add_rejects_overlap():
    p = Partition([Class(V(1), frozenset({"x"}))])
    with pytest.raises(PartitionError):
        p.add(Class(V(2), frozenset({"x"})))


def test_remove_var_drops_empty_class():
    p = Partition([Class(V(1), frozenset({"x"})), Class(V(2), frozenset({"y", "z"}))])
    p.remove_var("x")
    p.remove_var("y")
    assert V(1) not in p
    assert p.get(V(2)).vars == {"z"}


def test_normalize_order_independent():
    a, b = Class(V(1), frozenset({"x"})), Class(V(2), frozenset({"y"}))
    assert normalize(Partition([a, b])) == normalize(Partition([b, a]))
    assert canonical(Partition([a, b])) == canonical(Partition([b, a]))
    assert normalize(TOP) is TOP
    assert canonical(TOP) != canonical(Partition())


def test_render_brace_notation():
    a = Allocator()
    p = parse_partition("{v7, x3 : phi.B3(v1,v4) | v1, x1, x3x}", a)
    assert render(p) == "{v1, x1, x3x | v7, x3 : phi.B3(v1,v4)}"
    assert render(parse_partition(P1)) == "{v1, x1, x3 | v2, y1, y3, v1+v4 | v3, z1, z3}"


def test_parse_nested_annotation():
    p = parse_partition("{v9, w : φ.B5(v1, phi.B3(v2,v3))}")
    vpf = p.get(V(9)).vpf
    assert vpf == ValuePhiFunction("B5", V(1), ValuePhiFunction("B3", V(2), V(3)))
    assert vpf.depth() == 2


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_partition("v1, x")
    with pytest.raises(ValueError):
        parse_partition("{x, v1}")


def test_json_format():
    p = parse_partition("{v7, x3 : phi.B3(v1,v4) | v9, w, v7+v8 : phi.B3(v3, phi.B2(v5,v6))}")
    data = to_json(p)
    assert data[0] == {"vn": 7, "vars": ["x3"], "consts": [], "exprs": [],
                       "vpf": {"block": "B3", "l": 1, "r": 4}}
    assert data[1]["exprs"] == [{"op": "+", "l": 7, "r": 8}]
    assert data[1]["vpf"]["r"] == {"block": "B2", "l": 5, "r": 6}
    assert from_json(json.loads(json.dumps(data))) == p
    assert from_json(to_json(TOP)) is TOP


def test_dense_numbering_and_rename():
    p = parse_partition("{v4, x | v9, y, v4+v4}")
    m = dense_numbering([p])
    assert m == {V(4): V(1), V(9): V(2)}
    assert render(rename(p, m)) == "{v1, x | v2, y, v1+v1}"


def test_isomorphic():
    p = parse_partition("{v7, x3 : phi(v1,v4) | v8, y3, v7+v7}")
    q = parse_partition("{v20, x3 : phi(v2,v5) | v30, y3, v20+v20}")
    assert isomorphic(p, q)
    assert not isomorphic(p, q, fixed=[1])
    r = parse_partition("{v20, x3 : phi(v2,v2) | v30, y3, v20+v20}")
    assert not isomorphic(p, r)
    assert not isomorphic(p, parse_partition("{v7, x3 : phi(v1,v4)}"))
    assert isomorphic(TOP, TOP) and not isomorphic(TOP, Partition())
