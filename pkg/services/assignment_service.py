"""Exact minimum-cost bipartite assignment with infeasible cells."""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from models.errors import InvalidArgumentError
from models.schemas import INFEASIBLE, CostMatrix, Matching
from utils.logger import setup_logger

logger = setup_logger(__name__)

_TOLERANCE = 1e-9


def _optimum(cost: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> Tuple[int, float, List[Tuple[int, int]]]:
    """
    Best matching on a sub-matrix: maximum feasible cardinality, then minimum cost.

    Infeasible cells are completed with a constant larger than any achievable
    difference in finite cost, so the solver never trades a feasible pair away.
    """
    if not rows or not cols:
        return 0, 0.0, []
    sub = cost[np.ix_(rows, cols)]
    feasible = np.isfinite(sub)
    if not feasible.any():
        return 0, 0.0, []

    finite = sub[feasible]
    span = float(finite.max() - finite.min())
    size = min(len(rows), len(cols))
    big = float(np.abs(finite).max()) + (size + 1) * (span + 1.0)
    completed = np.where(feasible, sub, big)

    row_idx, col_idx = linear_sum_assignment(completed)
    pairs = sorted(
        (rows[r], cols[c]) for r, c in zip(row_idx, col_idx) if feasible[r, c]
    )
    total = 0.0
    for r, c in pairs:
        total += cost[r, c]
    return len(pairs), total, pairs


def _reaches(card: int, total: float, best_card: int, best_total: float) -> bool:
    return card == best_card and abs(total - best_total) <= _TOLERANCE * max(1.0, abs(best_total))


def solve_assignment(matrix: CostMatrix) -> Matching:
    """
    Solve the gated assignment problem.

    Args:
        matrix: Cost matrix; +inf cells may never be matched

    Returns:
        Matching of maximum feasible cardinality and minimum total cost. Among
        optimal matchings the lexicographically smallest (row, col) sequence wins.
    """
    cost = matrix.cost
    rows, cols = matrix.rows, matrix.cols
    best_card, best_total, _ = _optimum(cost, list(range(rows)), list(range(cols)))
    if best_card == 0:
        return Matching()

    pairs: List[Tuple[int, int]] = []
    fixed_total = 0.0
    free_cols = list(range(cols))
    for row in range(rows):
        remaining_rows = list(range(row + 1, rows))
        chosen: Optional[int] = None
        for col in free_cols:
            if not np.isfinite(cost[row, col]):
                continue
            others = [c for c in free_cols if c != col]
            card, total, _ = _optimum(cost, remaining_rows, others)
            if _reaches(len(pairs) + 1 + card, fixed_total + cost[row, col] + total, best_card, best_total):
                chosen = col
                break
        if chosen is None:
            continue
        pairs.append((row, chosen))
        fixed_total += cost[row, chosen]
        free_cols.remove(chosen)
        if len(pairs) == best_card:
            break

    total_cost = 0.0
    for r, c in pairs:
        total_cost += float(cost[r, c])
    logger.debug(f"Assigned {len(pairs)} pairs on a {rows}x{cols} matrix, cost {total_cost:.6f}")
    return Matching(pairs=tuple(pairs), total_cost=total_cost)


def similarity_to_cost(similarity, threshold: float) -> CostMatrix:
    """
    Turn similarities into costs: -s where s >= threshold, infeasible otherwise.

    The gate is inclusive.
    """
    if not -1.0 <= threshold <= 1.0:
        raise InvalidArgumentError(f"threshold {threshold} outside [-1, 1]")
    s = np.asarray(similarity, dtype=np.float64)
    if s.size == 0:
        s = s.reshape((s.shape[0], 0) if s.ndim == 2 else (0, 0))
    return CostMatrix(cost=np.where(s >= threshold, -s, INFEASIBLE))
