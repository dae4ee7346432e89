"""Value numbers, equivalence classes and partitions.

A partition maps value numbers to classes.  Each class holds the variables,
constants and value expressions known to share that value at a program
point, optionally annotated with a value phi-function naming the join-block
merge it equals.  The special partition TOP stands for "not yet reached".
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Union

from .ir import Atom, BinOp, Const, Phi, Rhs, Var


class PartitionError(Exception):
    """An internal invariant of a partition was violated."""


class ValueNumber(int):
    __slots__ = ()

    def __repr__(self):
        return f"v{int(self)}"

    __str__ = __repr__


@dataclass(frozen=True)
class ValueExpression:
    op: str
    left: ValueNumber
    right: ValueNumber

    def __str__(self):
        return f"{self.left}{self.op}{self.right}"

    def sort_key(self):
        return (int(self.left), self.op, int(self.right))


@dataclass(frozen=True)
class ValuePhiFunction:
    block: str
    left: "Operand"
    right: "Operand"

    def __str__(self):
        return f"phi.{self.block}({self.left},{self.right})"

    def depth(self) -> int:
        return 1 + max(o.depth() if isinstance(o, ValuePhiFunction) else 0
                       for o in (self.left, self.right))


Operand = Union[ValueNumber, ValuePhiFunction]


@dataclass(frozen=True)
class Class:
    vn: ValueNumber
    vars: frozenset[str] = frozenset()
    consts: frozenset[int] = frozenset()
    exprs: frozenset[ValueExpression] = frozenset()
    vpf: ValuePhiFunction | None = None

    def __post_init__(self):
        if len(self.consts) > 1:
            raise PartitionError(f"class {self.vn} holds two constants {sorted(self.consts)}")

    @property
    def empty(self) -> bool:
        return not (self.vars or self.consts or self.exprs)

    def add(self, var: str | None = None, expr: ValueExpression | None = None) -> "Class":
        return replace(
            self,
            vars=self.vars | {var} if var is not None else self.vars,
            exprs=self.exprs | {expr} if expr is not None else self.exprs,
        )

    def __str__(self):
        members = [str(self.vn), *sorted(self.vars), *map(str, sorted(self.consts)),
                   *map(str, sorted(self.exprs, key=ValueExpression.sort_key))]
        text = ", ".join(members)
        return f"{text} : {self.vpf}" if self.vpf else text


class _Top:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "TOP"

    __str__ = __repr__


TOP = _Top()


class Partition:
    """A set of classes with lookup indexes over their members.

    Partitions are built by copy-and-modify and must not be mutated once
    handed to another program point.
    """

    def __init__(self, classes: Iterable[Class] = ()):
        self._classes: dict[ValueNumber, Class] = {}
        self._var: dict[str, ValueNumber] = {}
        self._const: dict[int, ValueNumber] = {}
        self._expr: dict[ValueExpression, ValueNumber] = {}
        self._vpf: dict[ValuePhiFunction, ValueNumber] = {}
        for c in classes:
            self.add(c)

    def copy(self) -> "Partition":
        new = Partition.__new__(Partition)
        new._classes = dict(self._classes)
        new._var = dict(self._var)
        new._const = dict(self._const)
        new._expr = dict(self._expr)
        new._vpf = dict(self._vpf)
        return new

    def __iter__(self) -> Iterator[Class]:
        return iter(self._classes.values())

    def __len__(self):
        return len(self._classes)

    def __contains__(self, vn) -> bool:
        return vn in self._classes

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self._classes == other._classes

    def __hash__(self):
        return hash(frozenset(self._classes.values()))

    def get(self, vn) -> Class | None:
        return self._classes.get(vn)

    def class_of_var(self, name: str) -> Class | None:
        vn = self._var.get(name)
        return None if vn is None else self._classes[vn]

    def class_of_const(self, value: int) -> Class | None:
        vn = self._const.get(value)
        return None if vn is None else self._classes[vn]

    def class_of_expr(self, ve: ValueExpression) -> Class | None:
        vn = self._expr.get(ve)
        return None if vn is None else self._classes[vn]

    def class_with_vpf(self, vpf: ValuePhiFunction) -> Class | None:
        vn = self._vpf.get(vpf)
        return None if vn is None else self._classes[vn]

    def variables(self) -> set[str]:
        return set(self._var)

    def add(self, c: Class) -> None:
        if c.empty:
            raise PartitionError(f"empty class {c.vn}")
        if c.vn in self._classes:
            raise PartitionError(f"value number {c.vn} already has a class")
        for index, members in ((self._var, c.vars), (self._const, c.consts), (self._expr, c.exprs)):
            for m in members:
                if m in index:
                    raise PartitionError(f"{m} is in both {index[m]} and {c.vn}")
        self._classes[c.vn] = c
        for m in c.vars:
            self._var[m] = c.vn
        for m in c.consts:
            self._const[m] = c.vn
        for m in c.exprs:
            self._expr[m] = c.vn
        if c.vpf is not None:
            self._vpf.setdefault(c.vpf, c.vn)

    def discard(self, vn) -> Class | None:
        c = self._classes.pop(vn, None)
        if c is None:
            return None
        for m in c.vars:
            del self._var[m]
        for m in c.consts:
            del self._const[m]
        for m in c.exprs:
            del self._expr[m]
        if c.vpf is not None and self._vpf.get(c.vpf) == vn:
            del self._vpf[c.vpf]
            for other in self._classes.values():
                if other.vpf == c.vpf:
                    self._vpf[c.vpf] = other.vn
                    break
        return c

    def put(self, c: Class) -> None:
        """Insert ``c``, replacing the class with the same value number."""
        self.discard(c.vn)
        self.add(c)

    def remove_var(self, name: str) -> None:
        c = self.class_of_var(name)
        if c is None:
            return
        self.discard(c.vn)
        c = replace(c, vars=c.vars - {name})
        if not c.empty:
            self.add(c)

    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"Partition({render(self)})"


PartitionLike = Union[Partition, _Top]


# -- value-number allocation --------------------------------------------------

class Allocator:
    """Memoized value-number allocation.

    The same key always yields the same number, so re-running joins and
    transfer functions during fixpoint iteration reproduces value numbers.
    """

    def __init__(self, start: int = 1, inputs: Iterable[str] | None = None):
        self.memo: dict[tuple, ValueNumber] = {}
        self.keys: dict[ValueNumber, tuple] = {}
        self.next = start
        # None: any unknown variable is accepted as an input
        self.inputs = None if inputs is None else frozenset(inputs)

    def fresh(self, key: tuple) -> ValueNumber:
        vn = self.memo.get(key)
        if vn is None:
            vn = ValueNumber(self.next)
            self.next += 1
            self.memo[key] = vn
            self.keys[vn] = key
        return vn

    def reserve(self, upto: int) -> None:
        """Never hand out numbers <= ``upto`` (used for hand-built partitions)."""
        self.next = max(self.next, upto + 1)

    def kind(self, vn) -> str | None:
        key = self.keys.get(vn)
        return key[0] if key else None

    def is_global(self, vn) -> bool:
        """Constants and inputs denote the same value at every point."""
        return self.kind(vn) in ("const", "input")

    def const_value(self, vn) -> int | None:
        key = self.keys.get(vn)
        return key[1] if key and key[0] == "const" else None


def fresh_value_number(a: Allocator, key: tuple) -> ValueNumber:
    return a.fresh(key)


def lookup_operand(p: Partition, operand: Atom, a: Allocator) -> ValueNumber:
    """Value number of an operand, adding a class for a new constant or input."""
    if isinstance(operand, Const):
        c = p.class_of_const(operand.value)
        if c is not None:
            return c.vn
        vn, member = a.fresh(("const", operand.value)), {"consts": frozenset([operand.value])}
    else:
        c = p.class_of_var(operand.name)
        if c is not None:
            return c.vn
        if a.inputs is not None and operand.name not in a.inputs:
            raise PartitionError(f"variable {operand.name} is not defined at this point")
        vn, member = a.fresh(("input", operand.name)), {"vars": frozenset([operand.name])}
    existing = p.get(vn)
    if existing is None:
        p.add(Class(vn, **member))
    else:
        p.put(replace(existing, **{k: getattr(existing, k) | v for k, v in member.items()}))
    return vn


def value_expr(rhs: Rhs, p: Partition, a: Allocator) -> ValueNumber | ValueExpression:
    if isinstance(rhs, (Const, Var)):
        return lookup_operand(p, rhs, a)
    if isinstance(rhs, BinOp):
        return ValueExpression(rhs.op, lookup_operand(p, rhs.left, a), lookup_operand(p, rhs.right, a))
    if isinstance(rhs, Phi):
        raise PartitionError("phi must be lowered to copies before analysis")
    raise TypeError(rhs)


def intersect_classes(c1: Class, c2: Class, k: str, a: Allocator) -> Class | None:
    vars_ = c1.vars & c2.vars
    consts = c1.consts & c2.consts
    exprs = c1.exprs & c2.exprs
    if not (vars_ or consts or exprs):
        return None
    if c1.vn == c2.vn:
        vpf = c1.vpf if c1.vpf == c2.vpf else None
        return Class(c1.vn, vars_, consts, exprs, vpf)
    vn = a.fresh(("join", k, _least_member(vars_, consts, exprs)))
    return Class(vn, vars_, consts, exprs, ValuePhiFunction(k, c1.vn, c2.vn))


def _least_member(vars_, consts, exprs) -> tuple:
    # Keyed by a member rather than by the incoming value numbers: around a
    # loop the incoming numbers change every sweep, the members do not.
    if vars_:
        return ("var", min(vars_))
    if consts:
        return ("const", min(consts))
    e = min(exprs, key=ValueExpression.sort_key)
    return ("expr", e.op, int(e.left), int(e.right))


def normalize(p: PartitionLike) -> PartitionLike:
    if p is TOP:
        return TOP
    return Partition(sorted(p, key=lambda c: int(c.vn)))


def canonical(p: PartitionLike):
    """A hashable, order-independent key; equal iff the partitions are equal."""
    if p is TOP:
        return "TOP"
    return tuple(sorted(((int(c.vn), c) for c in p), key=lambda t: t[0]))


# -- rendering ---------------------------------------------------------------

def render(p: PartitionLike) -> str:
    if p is TOP:
        return "TOP"
    return "{" + " | ".join(str(c) for c in normalize(p)) + "}"


def operand_to_json(o: Operand):
    if isinstance(o, ValuePhiFunction):
        return vpf_to_json(o)
    return int(o)


def vpf_to_json(vpf: ValuePhiFunction) -> dict:
    return {"block": vpf.block, "l": operand_to_json(vpf.left), "r": operand_to_json(vpf.right)}


def class_to_json(c: Class) -> dict:
    return {
        "vn": int(c.vn),
        "vars": sorted(c.vars),
        "consts": sorted(c.consts),
        "exprs": [{"op": e.op, "l": int(e.left), "r": int(e.right)}
                  for e in sorted(c.exprs, key=ValueExpression.sort_key)],
        "vpf": vpf_to_json(c.vpf) if c.vpf else None,
    }


def to_json(p: PartitionLike):
    if p is TOP:
        return "TOP"
    return [class_to_json(c) for c in normalize(p)]


def operand_from_json(o) -> Operand:
    if isinstance(o, dict):
        return vpf_from_json(o)
    return ValueNumber(o)


def vpf_from_json(d: dict) -> ValuePhiFunction:
    return ValuePhiFunction(d["block"], operand_from_json(d["l"]), operand_from_json(d["r"]))


def from_json(data) -> PartitionLike:
    if data == "TOP":
        return TOP
    return Partition(
        Class(
            ValueNumber(d["vn"]),
            frozenset(d["vars"]),
            frozenset(d["consts"]),
            frozenset(ValueExpression(e["op"], ValueNumber(e["l"]), ValueNumber(e["r"]))
                      for e in d["exprs"]),
            vpf_from_json(d["vpf"]) if d.get("vpf") else None,
        )
        for d in data
    )


# -- text notation ----------------------------------------------------------

_VN_RE = re.compile(r"v(\d+)$")
_EXPR_RE = re.compile(r"(v\d+|\d+)\s*([^\w\s,|(){}:])\s*(v\d+|\d+)$")


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [s.strip() for s in parts]


def parse_partition(text: str, a: Allocator | None = None, block: str = "B") -> PartitionLike:
    """Parse ``{v1, x1, x3 | v2, y1, v1+1 | v7, x3 : phi.B3(v1,v4)}``.

    An integer operand inside a value expression (``v1+1``) is replaced by the
    allocator's value number for that constant.  ``φ`` and ``phi`` without a
    block suffix are tagged with ``block``.
    """
    text = text.strip()
    if text in ("TOP", "⊤"):
        return TOP
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"partition must be wrapped in braces: {text!r}")
    body = text[1:-1].strip()
    if a is None:
        a = Allocator()
    explicit = [int(m) for m in re.findall(r"\bv(\d+)\b", body)]
    if explicit:
        a.reserve(max(explicit))

    def operand(tok: str) -> ValueNumber:
        if m := _VN_RE.match(tok):
            return ValueNumber(int(m.group(1)))
        return a.fresh(("const", int(tok)))

    def vpf(tok: str) -> Operand:
        tok = tok.strip()
        if m := _VN_RE.match(tok):
            return ValueNumber(int(m.group(1)))
        m = re.match(r"(?:phi|φ)(?:\.([A-Za-z_][\w.]*)|_([A-Za-z_][\w.]*))?\s*\((.*)\)$", tok)
        if not m:
            raise ValueError(f"bad value phi-function {tok!r}")
        args = _split_top(m.group(3), ",")
        if len(args) != 2:
            raise ValueError(f"value phi-function needs two operands: {tok!r}")
        return ValuePhiFunction(m.group(1) or m.group(2) or block, vpf(args[0]), vpf(args[1]))

    classes = []
    if body:
        for chunk in _split_top(body, "|"):
            members, _, annot = chunk.partition(":")
            toks = _split_top(members, ",")
            m = _VN_RE.match(toks[0])
            if not m:
                raise ValueError(f"class must start with its value number: {chunk!r}")
            vars_, consts, exprs = set(), set(), set()
            for tok in toks[1:]:
                if e := _EXPR_RE.match(tok):
                    exprs.add(ValueExpression(e.group(2), operand(e.group(1)), operand(e.group(3))))
                elif tok.isdigit():
                    consts.add(int(tok))
                else:
                    vars_.add(tok)
            ann = vpf(annot) if annot.strip() else None
            classes.append(Class(ValueNumber(int(m.group(1))), frozenset(vars_),
                                 frozenset(consts), frozenset(exprs), ann))
    return Partition(classes)


# -- renaming ----------------------------------------------------------------

def rename_operand(o: Operand, m: dict) -> Operand:
    if isinstance(o, ValuePhiFunction):
        return ValuePhiFunction(o.block, rename_operand(o.left, m), rename_operand(o.right, m))
    return m[o]


def rename(p: PartitionLike, m: dict) -> PartitionLike:
    if p is TOP:
        return TOP
    return Partition(
        Class(m[c.vn], c.vars, c.consts,
              frozenset(ValueExpression(e.op, m[e.left], m[e.right]) for e in c.exprs),
              rename_operand(c.vpf, m) if c.vpf else None)
        for c in p
    )


def operand_vns(o: Operand) -> Iterator[ValueNumber]:
    if isinstance(o, ValuePhiFunction):
        yield from operand_vns(o.left)
        yield from operand_vns(o.right)
    else:
        yield o


def class_vns(c: Class) -> Iterator[ValueNumber]:
    yield c.vn
    for e in sorted(c.exprs, key=ValueExpression.sort_key):
        yield e.left
        yield e.right
    if c.vpf:
        yield from operand_vns(c.vpf)


def dense_numbering(partitions: Iterable[PartitionLike], start: int = 1) -> dict:
    """Map value numbers to 1, 2, ... in order of first appearance."""
    m: dict[ValueNumber, ValueNumber] = {}
    for p in partitions:
        if p is TOP:
            continue
        for c in normalize(p):
            for vn in class_vns(c):
                if vn not in m:
                    m[vn] = ValueNumber(start + len(m))
    return m


def isomorphic(p: PartitionLike, q: PartitionLike, fixed: Iterable[int] = ()) -> bool:
    """True if some bijective renaming of value numbers maps ``p`` onto ``q``.

    Value numbers in ``fixed`` must map to themselves.
    """
    if p is TOP or q is TOP:
        return p is q
    if len(p) != len(q):
        return False
    pcs = sorted(p, key=lambda c: int(c.vn))
    qcs = list(q)
    sig = lambda c: (c.vars, c.consts, len(c.exprs), c.vpf is None)
    fwd0 = {ValueNumber(v): ValueNumber(v) for v in fixed}

    def bind(a, b, fwd, back):
        if isinstance(a, ValuePhiFunction) or isinstance(b, ValuePhiFunction):
            if not (isinstance(a, ValuePhiFunction) and isinstance(b, ValuePhiFunction)):
                return None
            if a.block != b.block:
                return None
            r = bind(a.left, b.left, fwd, back)
            return r and bind(a.right, b.right, *r)
        if fwd.get(a, b) != b or back.get(b, a) != a:
            return None
        if a in fwd0 and fwd0[a] != b:
            return None
        return {**fwd, a: b}, {**back, b: a}

    def match_exprs(es, fs, fwd, back):
        if not es:
            yield fwd, back
            return
        e, rest = es[0], es[1:]
        for i, f in enumerate(fs):
            if f.op != e.op:
                continue
            r = bind(e.left, f.left, fwd, back)
            r = r and bind(e.right, f.right, *r)
            if r:
                yield from match_exprs(rest, fs[:i] + fs[i + 1:], *r)

    def search(i, used, fwd, back):
        if i == len(pcs):
            return True
        c = pcs[i]
        for j, d in enumerate(qcs):
            if j in used or sig(c) != sig(d):
                continue
            r = bind(c.vn, d.vn, fwd, back)
            if r and c.vpf is not None:
                r = bind(c.vpf, d.vpf, *r)
            if not r:
                continue
            for f2, b2 in match_exprs(sorted(c.exprs, key=ValueExpression.sort_key),
                                      list(d.exprs), *r):
                if search(i + 1, used | {j}, f2, b2):
                    return True
        return False

    return search(0, frozenset(), dict(fwd0), {v: k for k, v in fwd0.items()})
