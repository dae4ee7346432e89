"""Textual SSA IR: parsing, rendering, validation and phi lowering.

A program is a list of blocks, each with an explicit ordered predecessor
list.  Successors are derived from predecessor lists, in source order of the
successor blocks.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Union


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


Atom = Union[Const, Var]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Atom
    right: Atom

    def __str__(self):
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Phi:
    left: str
    right: str

    def __str__(self):
        return f"phi({self.left}, {self.right})"


Rhs = Union[Const, Var, BinOp, Phi]


@dataclass(frozen=True)
class Statement:
    id: int
    target: str
    rhs: Rhs
    # set on copies produced by lower_phis: the join block the phi lived in
    phi_block: str | None = None

    def __str__(self):
        return f"{self.target} = {self.rhs}"

    def uses(self) -> list[str]:
        rhs = self.rhs
        if isinstance(rhs, Var):
            return [rhs.name]
        if isinstance(rhs, BinOp):
            return [a.name for a in (rhs.left, rhs.right) if isinstance(a, Var)]
        if isinstance(rhs, Phi):
            return [rhs.left, rhs.right]
        return []


@dataclass(frozen=True)
class Block:
    id: str
    preds: tuple[str, ...] = ()
    stmts: tuple[Statement, ...] = ()

    @property
    def is_join(self) -> bool:
        return len(self.preds) == 2

    def phis(self) -> list[Statement]:
        return [s for s in self.stmts if isinstance(s.rhs, Phi)]


@dataclass(frozen=True)
class Program:
    blocks: tuple[Block, ...]
    entry_id: str = "entry"
    exit_id: str = "exit"

    @cached_property
    def _by_id(self) -> dict[str, Block]:
        return {b.id: b for b in self.blocks}

    def block(self, block_id: str) -> Block:
        return self._by_id[block_id]

    def __contains__(self, block_id: str) -> bool:
        return block_id in self._by_id

    def statements(self) -> Iterator[tuple[Block, Statement]]:
        for b in self.blocks:
            for s in b.stmts:
                yield b, s

    @cached_property
    def _stmt_index(self) -> dict[int, tuple[Block, Statement]]:
        return {s.id: (b, s) for b, s in self.statements()}

    def statement(self, stmt_id: int) -> Statement:
        return self._stmt_index[stmt_id][1]

    def block_of(self, stmt_id: int) -> Block:
        return self._stmt_index[stmt_id][0]

    @cached_property
    def defined(self) -> frozenset[str]:
        return frozenset(s.target for _, s in self.statements())

    @cached_property
    def inputs(self) -> frozenset[str]:
        """Names used but never assigned; each is an opaque program input."""
        used = {u for _, s in self.statements() for u in s.uses()}
        return frozenset(used - self.defined)

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for p in b.preds:
                if p in succ:
                    succ[p].append(b.id)
        return succ

    def has_phis(self) -> bool:
        return any(isinstance(s.rhs, Phi) for _, s in self.statements())


# -- parsing -----------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_OPS = "".join(sorted(set(string.punctuation) - set("#(),:=_.")))
_OP = "[" + re.escape(_OPS) + "]"
_ATOM = rf"(?:{_NAME}|\d+)"

_BLOCK_RE = re.compile(rf"block\s+({_NAME})\s*:\s*$")
_PREDS_RE = re.compile(rf"preds\s*:\s*({_NAME}(?:\s*,\s*{_NAME})*)\s*$")
_STMT_RE = re.compile(rf"({_NAME})\s*=\s*(.*?)\s*$")
_PHI_RE = re.compile(rf"phi\s*\(\s*({_NAME})\s*,\s*({_NAME})\s*\)$")
_BIN_RE = re.compile(rf"({_ATOM})\s*({_OP})\s*({_ATOM})$")
_INT_RE = re.compile(r"\d+$")
_NAME_RE = re.compile(rf"{_NAME}$")

RESERVED = {"phi", "block", "preds"}


def _atom(tok: str) -> Atom:
    return Const(int(tok)) if tok.isdigit() else Var(tok)


def _parse_rhs(text: str, line: int, col: int) -> Rhs:
    if m := _PHI_RE.match(text):
        return Phi(m.group(1), m.group(2))
    if _INT_RE.match(text):
        return Const(int(text))
    if _NAME_RE.match(text) and text not in RESERVED:
        return Var(text)
    if m := _BIN_RE.match(text):
        for tok in (m.group(1), m.group(3)):
            if tok in RESERVED:
                raise ParseError(f"reserved word {tok!r} used as operand", line, col)
        return BinOp(m.group(2), _atom(m.group(1)), _atom(m.group(3)))
    raise ParseError(f"cannot parse right-hand side {text!r}", line, col)


def parse_program(text: str) -> Program:
    blocks: list[dict] = []
    seen: dict[str, int] = {}
    next_id = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        body = line.strip()
        if not body:
            continue
        col = len(line) - len(line.lstrip()) + 1
        if m := _BLOCK_RE.match(body):
            name = m.group(1)
            if name in seen:
                raise ParseError(f"duplicate block {name!r}", lineno, col)
            seen[name] = lineno
            blocks.append({"id": name, "preds": None, "stmts": [], "line": lineno})
            continue
        if not blocks:
            raise ParseError("statement outside of a block", lineno, col)
        cur = blocks[-1]
        if m := _PREDS_RE.match(body):
            if cur["preds"] is not None or cur["stmts"]:
                raise ParseError("preds clause must directly follow the block header", lineno, col)
            cur["preds"] = [p.strip() for p in m.group(1).split(",")]
            continue
        if body.startswith("preds"):
            raise ParseError("malformed preds clause", lineno, col)
        if m := _STMT_RE.match(body):
            target = m.group(1)
            if target in RESERVED:
                raise ParseError(f"reserved word {target!r} used as a variable", lineno, col)
            rhs = _parse_rhs(m.group(2), lineno, col + m.start(2))
            cur["stmts"].append(Statement(next_id, target, rhs))
            next_id += 1
            continue
        raise ParseError(f"syntax error: {body!r}", lineno, col)

    for b in blocks:
        for p in b["preds"] or ():
            if p not in seen:
                raise ParseError(f"unknown block {p!r} in preds of {b['id']!r}", b["line"], 1)
    for required in ("entry", "exit"):
        if required not in seen:
            raise ParseError(f"missing mandatory block {required!r}")
    return Program(tuple(
        Block(b["id"], tuple(b["preds"] or ()), tuple(b["stmts"])) for b in blocks
    ))


def render_program(p: Program) -> str:
    out = []
    for b in p.blocks:
        out.append(f"block {b.id}:")
        if b.preds:
            out.append("  preds: " + ", ".join(b.preds))
        for s in b.stmts:
            out.append(f"  {s}")
    return "\n".join(out) + "\n"


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    where: Union[int, str]   # statement id or block id
    kind: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.kind}: {self.message}"


@dataclass
class ValidationReport:
    errors: list[Violation] = field(default_factory=list)

    def __bool__(self):
        return bool(self.errors)

    def kinds(self) -> set[str]:
        return {e.kind for e in self.errors}


def reachable(p: Program) -> set[str]:
    seen = {p.entry_id}
    stack = [p.entry_id]
    while stack:
        for n in p.successors[stack.pop()]:
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return seen


def validate_ssa(p: Program) -> ValidationReport:
    errs: list[Violation] = []
    add = lambda where, kind, msg: errs.append(Violation(where, kind, msg))

    for bid in (p.entry_id, p.exit_id):
        if bid in p and p.block(bid).stmts:
            add(bid, f"nonempty-{bid}", f"{bid} block must be empty")
    if p.entry_id in p and p.block(p.entry_id).preds:
        add(p.entry_id, "entry-has-preds", "entry block cannot have predecessors")

    for b in p.blocks:
        if len(b.preds) > 2:
            add(b.id, "too-many-preds", f"{len(b.preds)} predecessors (max 2)")
        if len(set(b.preds)) != len(b.preds):
            add(b.id, "duplicate-pred", "the same predecessor is listed twice")
        leading = True
        for s in b.stmts:
            if isinstance(s.rhs, Phi):
                if not b.is_join:
                    add(s.id, "phi-outside-join", f"{s} in block {b.id} with {len(b.preds)} preds")
                elif not leading:
                    add(s.id, "phi-not-leading", f"{s} follows a non-phi statement")
            else:
                leading = False

    live = reachable(p)
    for b in p.blocks:
        if b.id not in live:
            add(b.id, "unreachable", f"block {b.id} is not reachable from entry")

    # Copies lowered from one phi share a target but count as one definition.
    defs: dict[str, set] = {}
    for _, s in p.statements():
        key = ("phi", s.phi_block) if s.phi_block else s.id
        defs.setdefault(s.target, set()).add(key)
    for _, s in p.statements():
        d = defs.get(s.target)
        if d and len(d) > 1:
            add(s.id, "double-assignment", f"{s.target} is assigned more than once")
            defs[s.target] = set()

    errs.extend(_check_def_before_use(p, live))
    return ValidationReport(errs)


def _check_def_before_use(p: Program, live: set[str]) -> list[Violation]:
    defined = p.defined
    gen = {b.id: {s.target for s in b.stmts} for b in p.blocks}
    avail_out = {b.id: set(defined) for b in p.blocks}
    avail_out[p.entry_id] = set(gen[p.entry_id])

    def avail_in(b: Block) -> set[str]:
        preds = [q for q in b.preds if q in live]
        if b.id == p.entry_id or not preds:
            return set()
        return set.intersection(*(avail_out[q] for q in preds))

    changed = True
    while changed:
        changed = False
        for b in p.blocks:
            if b.id == p.entry_id or b.id not in live:
                continue
            new = avail_in(b) | gen[b.id]
            if new != avail_out[b.id]:
                avail_out[b.id] = new
                changed = True

    errs = []
    for b in p.blocks:
        if b.id not in live:
            continue
        have = avail_in(b)
        for s in b.stmts:
            if isinstance(s.rhs, Phi):
                for name, pred in zip((s.rhs.left, s.rhs.right), b.preds):
                    if name in defined and name not in avail_out.get(pred, ()):
                        errs.append(Violation(s.id, "undefined-on-path",
                                              f"{name} is not defined on every path to {pred}"))
            else:
                for name in s.uses():
                    if name in defined and name not in have:
                        errs.append(Violation(s.id, "undefined-on-path",
                                              f"{name} may be used before it is defined"))
            have.add(s.target)
    return errs


# -- transformations ---------------------------------------------------------

def lower_phis(p: Program) -> Program:
    """Replace every phi by a copy at the end of each predecessor.

    ``x = phi(a, b)`` in join block k with preds [L, R] becomes ``x = a``
    appended to L and ``x = b`` appended to R.
    """
    if not p.has_phis():
        return p
    next_id = max(s.id for _, s in p.statements()) + 1
    appended: dict[str, list[Statement]] = {b.id: [] for b in p.blocks}
    for b in p.blocks:
        for s in b.phis():
            for pred, src in zip(b.preds, (s.rhs.left, s.rhs.right)):
                appended[pred].append(Statement(next_id, s.target, Var(src), phi_block=b.id))
                next_id += 1
    blocks = []
    for b in p.blocks:
        kept = tuple(s for s in b.stmts if not isinstance(s.rhs, Phi))
        blocks.append(replace(b, stmts=kept + tuple(appended[b.id])))
    return replace(p, blocks=tuple(blocks))


def _dfs(p: Program) -> tuple[list[str], set[tuple[str, str]]]:
    """Postorder and back edges of a DFS from entry, children in source order."""
    post: list[str] = []
    back: set[tuple[str, str]] = set()
    state: dict[str, int] = {}   # 1 = on stack, 2 = done
    stack = [(p.entry_id, iter(p.successors[p.entry_id]))]
    state[p.entry_id] = 1
    while stack:
        node, it = stack[-1]
        for n in it:
            if n not in state:
                state[n] = 1
                stack.append((n, iter(p.successors[n])))
                break
            if state[n] == 1:
                back.add((node, n))
        else:
            stack.pop()
            state[node] = 2
            post.append(node)
    return post, back


def reverse_postorder(p: Program) -> list[str]:
    post, _ = _dfs(p)
    return post[::-1]


def back_edges(p: Program) -> set[tuple[str, str]]:
    return _dfs(p)[1]


def is_acyclic(p: Program) -> bool:
    return not back_edges(p)
