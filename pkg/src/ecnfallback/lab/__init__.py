"""Experiment harness: statistics, verdicts, matrices, CSV output, acceptance checks."""

from .matrix import CellResult, build_grid, full_grid, run_cell, run_matrix, tally
from .stats import Whiskers, normalized_rate, stabilization_time_s, whiskers
from .verdict import Color, Verdict, bundle_verdict, cell_verdict, flow_verdict

__all__ = [
    "CellResult", "Color", "Verdict", "Whiskers", "build_grid", "bundle_verdict", "cell_verdict",
    "flow_verdict", "full_grid", "normalized_rate", "run_cell", "run_matrix",
    "stabilization_time_s", "tally", "whiskers",
]
