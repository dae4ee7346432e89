"""Command-line front end: ``vphi analyze | check | stress``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass

from .analysis import (
    AnalysisState,
    EquivalentVariable,
    NonConvergence,
    RedundancyReport,
    analyze,
    detect_redundancies,
)
from .generate import diamonds, random_acyclic, random_loop
from .ir import ParseError, Program, parse_program, validate_ssa
from .oracle import DEFAULT_UNROLL, PathCapExceeded, differential_check
from .partition import (
    TOP,
    ValueNumber,
    dense_numbering,
    operand_to_json,
    operand_vns,
    rename,
    rename_operand,
    render,
    to_json,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NONCONVERGENCE = 2
EXIT_PATH_CAP = 3
EXIT_MISMATCH = 4


@dataclass(frozen=True)
class RunConfig:
    command: str
    path: str | None = None
    format: str = "text"
    dot: str | None = None
    dump: str = "redundant"
    max_iters: int | None = None
    unroll: int = DEFAULT_UNROLL
    seeds: int = 500
    random: bool = False
    acyclic: bool = False
    diamonds: int = 8


class _Fail(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _load(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise _Fail(EXIT_INVALID, f"{path}: {e.strerror}")
    try:
        p = parse_program(text)
    except ParseError as e:
        raise _Fail(EXIT_INVALID, f"{path}: {e}")
    report = validate_ssa(p)
    if report:
        raise _Fail(EXIT_INVALID, "\n".join(f"{path}: {v}" for v in report.errors))
    return p


def _analyze(p: Program, max_iters: int | None):
    try:
        return analyze(p, max_iters)
    except NonConvergence as e:
        raise _Fail(EXIT_NONCONVERGENCE, str(e))


# -- analyze -----------------------------------------------------------------

def _numbering(st: AnalysisState, report: RedundancyReport) -> dict:
    # numbered over every block point, so a witness reads the same with or
    # without --dump all-points
    parts = []
    for b in st.program.blocks:
        parts += [st.block_in.get(b.id, TOP), st.block_out.get(b.id, TOP)]
    parts += [st.pout[e.stmt] for e in report.entries]
    m = dense_numbering(parts)
    # witnesses may mention numbers no longer live at the statement
    for e in report.entries:
        if not isinstance(e.reason, EquivalentVariable):
            for vn in operand_vns(e.reason.vpf):
                m.setdefault(vn, ValueNumber(len(m) + 1))
    return m


def _reason(r, m) -> dict:
    if isinstance(r, EquivalentVariable):
        return {"kind": "equivalent-variable", "var": r.name}
    return {"kind": "value-phi", "vpf": operand_to_json(rename_operand(r.vpf, m))}


def _reason_text(r, m) -> str:
    if isinstance(r, EquivalentVariable):
        return f"same value as {r.name}"
    return f"value phi {rename_operand(r.vpf, m)}"


def _cmd_analyze(cfg: RunConfig) -> str:
    p = _load(cfg.path)
    st, report = _analyze(p, cfg.max_iters)
    all_points = cfg.dump == "all-points"
    m = _numbering(st, report)
    if cfg.dot:
        with open(cfg.dot, "w", encoding="utf-8") as f:
            f.write(render_dot(p, st, report))

    if cfg.format == "json":
        doc = {
            "sweeps": st.iterations,
            "redundant": [{"stmt": e.stmt, "block": e.block, "text": e.text,
                           "reason": _reason(e.reason, m)} for e in report.entries],
        }
        if all_points:
            doc["blocks"] = {
                b.id: {"in": to_json(rename(st.block_in.get(b.id, TOP), m)),
                       "out": to_json(rename(st.block_out.get(b.id, TOP), m))}
                for b in st.program.blocks
            }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    lines = [f"{len(report)} redundant statement(s), {st.iterations} sweep(s)"]
    for e in report.entries:
        lines.append(f"  {e.block}: {e.text}  ({_reason_text(e.reason, m)})")
    if all_points:
        for b in st.program.blocks:
            lines.append(f"block {b.id}")
            lines.append(f"  in:  {render(rename(st.block_in.get(b.id, TOP), m))}")
            lines.append(f"  out: {render(rename(st.block_out.get(b.id, TOP), m))}")
    return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def render_dot(p: Program, st: AnalysisState, report: RedundancyReport | None = None) -> str:
    """Graphviz source for ``p``'s CFG, redundant statements marked."""
    if report is None:
        report = detect_redundancies(st.program, st)
    flagged = report.stmt_ids()
    out = ["digraph cfg {", '  node [shape=box, fontname="monospace"];']
    for b in p.blocks:
        rows = [b.id]
        for s in b.stmts:
            rows.append(str(s) + (" [REDUNDANT]" if s.id in flagged else ""))
        label = "".join(_dot_escape(r) + "\\l" for r in rows)
        out.append(f'  "{_dot_escape(b.id)}" [label="{label}"];')
    for b in p.blocks:
        for pred in b.preds:
            out.append(f'  "{_dot_escape(pred)}" -> "{_dot_escape(b.id)}";')
    out.append("}")
    return "\n".join(out) + "\n"


# -- check -------------------------------------------------------------------

def _cmd_check(cfg: RunConfig) -> tuple[int, str]:
    if cfg.random:
        gen = random_acyclic if cfg.acyclic else random_loop
        jobs = [(seed, gen(seed)) for seed in range(cfg.seeds)]
    else:
        jobs = [(None, _load(cfg.path))]
    lines, total = [], 0
    for seed, p in jobs:
        try:
            found = differential_check(p, cfg.unroll)
        except NonConvergence as e:
            raise _Fail(EXIT_NONCONVERGENCE, f"seed {seed}: {e}" if seed is not None else str(e))
        except PathCapExceeded as e:
            raise _Fail(EXIT_PATH_CAP, f"seed {seed}: {e}" if seed is not None else str(e))
        for mm in found:
            d = mm.to_json()
            if seed is not None:
                d = {"seed": seed, **d}
            lines.append(json.dumps(d, sort_keys=False))
        total += len(found)
    lines.append(f"{total} mismatches")
    return (EXIT_OK if total == 0 else EXIT_MISMATCH), "\n".join(lines) + "\n"


# -- stress ------------------------------------------------------------------

def stress_stats(k: int, max_iters: int | None = None) -> dict:
    p = diamonds(k)
    t0 = time.perf_counter()
    st, _ = analyze(p, max_iters)
    wall = time.perf_counter() - t0
    points = [*st.pin.values(), *st.pout.values(), *st.block_in.values(), *st.block_out.values()]
    sizes = [len(x) for x in points if x is not TOP]
    return {
        "k": k,
        "blocks": len(p.blocks),
        "statements": sum(len(b.stmts) for b in st.program.blocks),
        "max_classes": max(sizes, default=0),
        "total_classes": sum(len(st.block_out[b.id]) for b in st.program.blocks),
        "sweeps": st.iterations,
        "max_vpf_depth": st.max_vpf_depth,
        "wall_s": round(wall, 4),
    }


def _cmd_stress(cfg: RunConfig) -> str:
    try:
        s = stress_stats(cfg.diamonds, cfg.max_iters)
    except NonConvergence as e:
        raise _Fail(EXIT_NONCONVERGENCE, str(e))
    if cfg.format == "json":
        return json.dumps(s) + "\n"
    return (f"diamonds: {s['k']}\nblocks: {s['blocks']}\nstatements: {s['statements']}\n"
            f"max classes: {s['max_classes']}\ntotal classes: {s['total_classes']}\n"
            f"sweeps: {s['sweeps']}\nvalue phi depth: {s['max_vpf_depth']}\nwall time: {s['wall_s']:.4f} s\n")


def run(cfg: RunConfig) -> tuple[int, str, str]:
    """Execute one command.  Returns (exit status, stdout text, stderr text)."""
    try:
        if cfg.command == "analyze":
            return EXIT_OK, _cmd_analyze(cfg), ""
        if cfg.command == "check":
            status, out = _cmd_check(cfg)
            return status, out, ""
        if cfg.command == "stress":
            return EXIT_OK, _cmd_stress(cfg), ""
    except _Fail as e:
        return e.status, "", str(e) + "\n"
    raise ValueError(f"unknown command {cfg.command!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vphi", description="Global value numbering with value phi-functions.")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze one program")
    a.add_argument("path")
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.add_argument("--dot", metavar="PATH", help="also write the CFG as graphviz source")
    a.add_argument("--dump", choices=("redundant", "all-points"), default="redundant")
    a.add_argument("--max-iters", type=int, metavar="N")

    c = sub.add_parser("check", help="compare the analysis with the brute-force oracle")
    c.add_argument("path", nargs="?")
    c.add_argument("--random", action="store_true", help="check generated programs instead of a file")
    c.add_argument("--seeds", type=int, default=500)
    c.add_argument("--unroll", type=int, default=DEFAULT_UNROLL)
    c.add_argument("--acyclic", action="store_true", help="generate acyclic programs (default: single loops)")

    s = sub.add_parser("stress", help="analyze a chain of k diamonds")
    s.add_argument("--diamonds", type=int, default=8, metavar="K")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--max-iters", type=int, metavar="N")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.command == "check":
        if ns.acyclic:
            ns.random = True
        if ns.random == (ns.path is not None):
            ap.error("check needs exactly one of a file or --random")
    cfg = RunConfig(**{k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__})
    status, out, err = run(cfg)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return status


if __name__ == "__main__":
    sys.exit(main())
