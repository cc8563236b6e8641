"""Projection of soft transport plans onto hard one-source-per-target
assignments.

Each target frame must get exactly one source frame, chosen to maximize the
total plan mass on the selected pairs. With enough sources (N >= M) this is
a rectangular linear sum assignment; with fewer sources than targets the
source rows are tiled into virtual copies, the first M tiled rows form a
square problem, and virtual indices fold back with mod N, which caps how
often one source can be reused at ceil(M/N).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .alignment import TransportPlan
from .errors import DimensionMismatchError, EmptyInputError


@dataclass(eq=False)
class AssignmentMatrix:
    """Binary N x M matrix whose columns each sum to one, plus the
    (source, target) pairs sorted by target index."""

    matrix: np.ndarray
    pairs: list[tuple[int, int]]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=int)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def source_for_target(self) -> dict[int, int]:
        return {m: n for n, m in self.pairs}


def _opt_value_and_cols(score: np.ndarray, rows: list[int], cols: list[int]):
    """Best achievable score assigning each listed row a distinct listed
    column, with the chosen column per row. Scores are summed with fsum so
    equal-value optima compare equal."""
    if not rows:
        return 0.0, {}
    sub = score[np.ix_(rows, cols)]
    r_idx, c_idx = linear_sum_assignment(-sub)
    chosen = {rows[r]: cols[c] for r, c in zip(r_idx, c_idx)}
    value = math.fsum(score[r, c] for r, c in chosen.items())
    return value, chosen


def _lexicographic_assignment(score: np.ndarray) -> list[int]:
    """Max-score injective assignment of every row to a column, choosing the
    lexicographically smallest column sequence among equal-score optima.

    Row by row, the smallest column whose forced choice still reaches the
    subproblem optimum is locked in. Optimality of a forced choice is
    confirmed by re-solving the remainder; candidates are skipped early via
    the bound score[row, col] + best(remaining rows, all columns), which
    prunes everything but near-ties in the generic case.
    """
    n_rows, n_cols = score.shape
    if n_cols < n_rows:
        raise DimensionMismatchError(
            f"cannot assign {n_rows} rows injectively into {n_cols} columns"
        )
    cols = list(range(n_cols))
    chosen: list[int] = []
    target_value, _ = _opt_value_and_cols(score, list(range(n_rows)), cols)
    for row in range(n_rows):
        rest_rows = list(range(row + 1, n_rows))
        upper_rest, _ = _opt_value_and_cols(score, rest_rows, cols)
        picked = None
        rest_value_after = 0.0
        for col in cols:
            bound = math.fsum([score[row, col], upper_rest])
            # Conservative prune: near-ties fall through to the exact check.
            if bound < target_value and not math.isclose(
                bound, target_value, rel_tol=1e-12, abs_tol=1e-12
            ):
                continue
            rest_cols = [c for c in cols if c != col]
            rest_value, rest_chosen = _opt_value_and_cols(score, rest_rows, rest_cols)
            forced = math.fsum(
                [score[row, col]] + [score[r, c] for r, c in rest_chosen.items()]
            )
            if forced == target_value:
                picked = col
                rest_value_after = rest_value
                break
        if picked is None:
            raise RuntimeError("lexicographic refinement lost the optimum")
        chosen.append(picked)
        cols.remove(picked)
        target_value = rest_value_after
    return chosen


def soft_to_hard(plan: TransportPlan) -> AssignmentMatrix:
    """Project a soft plan onto a hard assignment maximizing total mass.

    With N >= M each target gets a distinct source. With N < M the score
    rows are tiled ceil(M/N) times, the first M virtual rows form a square
    problem, and each virtual source folds back to virtual mod N. Ties
    break toward the lexicographically smallest (target, source) pairs.
    """
    gamma_soft = plan.matrix
    n, m = gamma_soft.shape
    if n == 0 or m == 0:
        raise EmptyInputError("cannot project an empty transport plan")
    if not np.all(np.isfinite(gamma_soft)):
        raise ValueError("transport plan contains non-finite entries")
    if np.any(gamma_soft < 0):
        raise ValueError("transport plan contains negative entries")

    if n >= m:
        # Rows of the solved problem are targets, columns are sources.
        cols_for_rows = _lexicographic_assignment(gamma_soft.T)
        pairs = [(cols_for_rows[tgt], tgt) for tgt in range(m)]
    else:
        reps = math.ceil(m / n)
        tiled = np.tile(gamma_soft, (reps, 1))[:m, :]
        cols_for_rows = _lexicographic_assignment(tiled.T)
        pairs = [(cols_for_rows[tgt] % n, tgt) for tgt in range(m)]

    matrix = np.zeros((n, m), dtype=int)
    for src, tgt in pairs:
        matrix[src, tgt] = 1
    return AssignmentMatrix(matrix=matrix, pairs=pairs)


def assignment_score(plan: TransportPlan, gamma: AssignmentMatrix) -> float:
    """Total plan mass captured by the selected pairs."""
    if plan.matrix.shape != gamma.matrix.shape:
        raise DimensionMismatchError(
            f"plan shape {plan.matrix.shape} does not match "
            f"assignment shape {gamma.matrix.shape}"
        )
    return float(np.sum(plan.matrix * gamma.matrix))
