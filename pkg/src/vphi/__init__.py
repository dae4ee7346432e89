"""Global value numbering for SSA programs with value phi-functions."""

from .analysis import AnalysisState, NonConvergence, analyze, run_fixpoint
from .ir import ParseError, Program, lower_phis, parse_program, validate_ssa
from .partition import Allocator, Partition, parse_partition, render

__all__ = [
    "Allocator", "AnalysisState", "NonConvergence", "ParseError", "Partition", "Program",
    "analyze", "lower_phis", "parse_partition", "parse_program", "render", "run_fixpoint",
    "validate_ssa",
]
