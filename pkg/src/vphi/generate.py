"""Program generators: random acyclic and single-loop SSA programs, and the
k-diamond stress family."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ir import Program, parse_program


@dataclass
class _Blk:
    name: str
    preds: list[str]
    lines: list[str] = field(default_factory=list)


class _Builder:
    def __init__(self, rng: random.Random, ops, inputs, max_stmts):
        self.rng = rng
        self.ops = ops
        self.inputs = inputs
        self.budget = max_stmts
        self.blocks: list[_Blk] = [_Blk("entry", [])]
        self.ntemp = 0
        self.nblock = 0
        self.exprs: list[tuple[str, str, str]] = []
        self.binop_of: dict[str, tuple[str, str, str]] = {}

    def block(self, preds: list[str]) -> _Blk:
        self.nblock += 1
        b = _Blk(f"B{self.nblock}", preds)
        self.blocks.append(b)
        return b

    def temp(self) -> str:
        self.ntemp += 1
        return f"t{self.ntemp}"

    def operand(self, avail: list[str]) -> str:
        r = self.rng.random()
        if r < 0.1:
            return str(self.rng.choice((1, 2)))
        pool = avail + list(self.inputs)
        # favour recently defined values
        if avail and r < 0.6:
            return self.rng.choice(avail[-3:])
        return self.rng.choice(pool)

    def fill(self, b: _Blk, avail: list[str], n: int) -> list[str]:
        avail = list(avail)
        for _ in range(n):
            if self.budget <= 0:
                break
            self.budget -= 1
            t = self.temp()
            r = self.rng.random()
            if r < 0.7:
                if self.exprs and self.rng.random() < 0.35:
                    l, op, rr = self.rng.choice(self.exprs)
                    if not all(x in avail or x in self.inputs or x.isdigit() for x in (l, rr)):
                        l, op, rr = self.operand(avail), self.rng.choice(self.ops), self.operand(avail)
                else:
                    l, op, rr = self.operand(avail), self.rng.choice(self.ops), self.operand(avail)
                self.exprs.append((l, op, rr))
                self.binop_of[t] = (l, op, rr)
                b.lines.append(f"{t} = {l} {op} {rr}")
            elif r < 0.85 and (avail or self.inputs):
                b.lines.append(f"{t} = {self.rng.choice(avail + list(self.inputs))}")
            else:
                b.lines.append(f"{t} = {self.rng.choice((1, 2))}")
            avail.append(t)
        return avail

    def phis(self, b: _Blk, left: list[str], right: list[str], n: int,
             exclude: tuple[str, ...] = ()) -> list[str]:
        """Emit up to ``n`` phis; operand lists come from the two predecessors."""
        defined = []
        lpool = [v for v in left if v not in exclude] + list(self.inputs)
        rpool = [v for v in right if v not in exclude] + list(self.inputs)
        for _ in range(n):
            if self.budget <= 0:
                break
            self.budget -= 1
            t = self.temp()
            # prefer values defined late on each side, they tend to mirror each other
            l = self.rng.choice(lpool[-4:] if self.rng.random() < 0.7 else lpool)
            r = self.rng.choice(rpool[-4:] if self.rng.random() < 0.7 else rpool)
            b.lines.append(f"{t} = phi({l}, {r})")
            defined.append(t)
        return defined

    def mirror(self, b: _Blk, left: list[str], right: list[str]) -> list[str]:
        """Merge the operands of a computation done on both sides and redo it.

        ``t = pa op pb`` after ``pa = phi(l1, l2), pb = phi(r1, r2)`` where
        ``l1 op r1`` was computed on the left and ``l2 op r2`` on the right.
        """
        def cands(avail):
            ok = set(avail) | set(self.inputs)
            return [self.binop_of[t] for t in avail
                    if t in self.binop_of and all(x in ok for x in self.binop_of[t][::2])]
        pairs = [(x, y) for x in cands(left) for y in cands(right) if x[1] == y[1]]
        if not pairs or self.budget < 3:
            return []
        (l1, op, r1), (l2, _, r2) = self.rng.choice(pairs)
        defined, operands = [], []
        for u, w in ((l1, l2), (r1, r2)):
            if u == w and self.rng.random() < 0.5:
                operands.append(u)
                continue
            t = self.temp()
            self.budget -= 1
            b.lines.append(f"{t} = phi({u}, {w})")
            defined.append(t)
            operands.append(t)
        t = self.temp()
        self.budget -= 1
        self.binop_of[t] = (operands[0], op, operands[1])
        b.lines.append(f"{t} = {operands[0]} {op} {operands[1]}")
        return defined + [t]

    def stmts_for(self, max_n: int) -> int:
        return self.rng.randint(0, max_n)

    # returns (first block, last block, names available at its end, blocks used)
    def region(self, preds: list[str], avail: list[str], budget: int):
        rng = self.rng
        shape = "single"
        if budget >= 4 and rng.random() < 0.55:
            shape = "diamond"
        elif budget >= 3 and rng.random() < 0.4:
            shape = "triangle"
        elif budget >= 2 and rng.random() < 0.3:
            shape = "seq"

        if shape == "single":
            b = self.block(preds)
            return b, b, self.fill(b, avail, self.stmts_for(3)), 1
        if shape == "seq":
            first, mid, av, used = self.region(preds, avail, budget - 1)
            _, last, av, used2 = self.region([mid.name], av, budget - used)
            return first, last, av, used + used2
        head = self.block(preds)
        av_head = self.fill(head, avail, self.stmts_for(2))
        used = 1
        if shape == "diamond":
            room = budget - 2
            lbudget = max(1, room // 2) if room > 2 else 1
            _, lend, lav, u1 = self.region([head.name], av_head, lbudget)
            _, rend, rav, u2 = self.region([head.name], av_head, max(1, room - u1))
            used += u1 + u2
            lpred, rpred = lend.name, rend.name
        else:
            _, aend, aav, u1 = self.region([head.name], av_head, budget - 2)
            used += u1
            if rng.random() < 0.5:
                lpred, rpred, lav, rav = head.name, aend.name, av_head, aav
            else:
                lpred, rpred, lav, rav = aend.name, head.name, aav, av_head
        j = self.block([lpred, rpred])
        used += 1
        common = [v for v in lav if v in rav]
        defined = self.mirror(j, lav, rav) if rng.random() < 0.5 else []
        defined += self.phis(j, lav, rav, rng.randint(0, 2 - min(2, len(defined))))
        # phis must lead the block
        j.lines.sort(key=lambda ln: "phi(" not in ln)
        av = self.fill(j, common + defined, self.stmts_for(3))
        return head, j, av, used

    def text(self, exit_pred: str) -> str:
        out = []
        for b in self.blocks + [_Blk("exit", [exit_pred])]:
            out.append(f"block {b.name}:")
            if b.preds:
                out.append("  preds: " + ", ".join(b.preds))
            out.extend("  " + ln for ln in b.lines)
        return "\n".join(out) + "\n"


def random_acyclic(seed: int, max_blocks: int = 6, max_stmts: int = 12,
                   ops: tuple[str, ...] = ("+", "*"), n_inputs: int = 2) -> Program:
    """A random acyclic SSA program.

    ``max_blocks`` counts blocks other than the empty entry and exit blocks.
    """
    rng = random.Random(seed)
    inputs = ("a", "b")[:n_inputs]
    bld = _Builder(rng, ops, inputs, max_stmts)
    _, last, _, _ = bld.region(["entry"], [], max_blocks)
    return parse_program(bld.text(last.name))


def random_loop(seed: int, max_body_blocks: int = 3, max_stmts: int = 12,
                ops: tuple[str, ...] = ("+", "*"), n_inputs: int = 2) -> Program:
    """A random program with exactly one natural loop.

    Shape: entry -> P -> H (preds [P, latch]) -> body ... -> latch -> H,
    and H -> X -> exit.
    """
    rng = random.Random(seed)
    inputs = ("a", "b")[:n_inputs]
    bld = _Builder(rng, ops, inputs, max_stmts)
    pre = bld.block(["entry"])
    av_pre = bld.fill(pre, [], rng.randint(1, 3))
    header = bld.block([pre.name, "?"])
    nphi = rng.randint(1, 2)
    phi_targets = [bld.temp() for _ in range(nphi)]
    bld.budget -= nphi
    av_h = av_pre + phi_targets
    av_h = bld.fill(header, av_h, rng.randint(0, 2))
    _, latch, av_latch, _ = bld.region([header.name], av_h, max_body_blocks)
    header.preds[1] = latch.name
    # back-edge operands must not read another phi target of the header:
    # the lowered copies run sequentially
    phis = []
    for t in phi_targets:
        lsrc = rng.choice(av_pre + list(inputs))
        pool = [v for v in av_latch if v not in phi_targets or v == t] + list(inputs)
        rsrc = rng.choice(pool[-4:] if rng.random() < 0.7 else pool)
        phis.append(f"{t} = phi({lsrc}, {rsrc})")
    header.lines[:0] = phis
    after = bld.block([header.name])
    bld.fill(after, av_h, rng.randint(0, 2))
    return parse_program(bld.text(after.name))


def diamonds(k: int) -> Program:
    """``k`` chained diamonds.  Diamond i assigns a_i and b_i with different
    right-hand sides on each branch, then computes s_i = a_i + b_i after the
    join.
    """
    lines = ["block entry:", "block B0:", "  preds: entry", "  s0 = x + y"]
    head = "B0"
    for i in range(1, k + 1):
        u, v = f"s{i - 1}", "x"
        lines += [
            f"block L{i}:", f"  preds: {head}",
            f"  al{i} = {u} + {v}", f"  bl{i} = {u} * {v}",
            f"block R{i}:", f"  preds: {head}",
            f"  ar{i} = {u} * {v}", f"  br{i} = {u} + {v}",
            f"block J{i}:", f"  preds: L{i}, R{i}",
            f"  a{i} = phi(al{i}, ar{i})", f"  b{i} = phi(bl{i}, br{i})",
            f"  s{i} = a{i} + b{i}",
        ]
        head = f"J{i}"
    lines += ["block exit:", f"  preds: {head}"]
    return parse_program("\n".join(lines) + "\n")
