"""Trajectory/detection matching.

The default objective maximizes the L2 norm of the matched affinities,
``||A * X||_2`` with at most one match per row and column.  For a
nonnegative ``A`` this is the assignment maximizing the sum of squared
affinities, so it reduces to a linear assignment on ``A**2``.  The
conventional linear-sum objective is available as ``objective="linear"``.

Among equally good matchings the one whose sorted pair list is
lexicographically smallest is returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import AffinityMatrix, MatchingMatrix

BRUTE_FORCE_LIMIT = 9
_REL_TOL = 1e-12


def _values(A) -> np.ndarray:
    arr = A.values if isinstance(A, AffinityMatrix) else np.asarray(A, dtype=np.float64)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("affinity must be a 2D matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("affinity contains non-finite entries")
    if arr.size and arr.min() < 0:
        raise ValueError("affinity must be nonnegative")
    return arr


def _weights(A: np.ndarray, objective: str) -> np.ndarray:
    if objective == "l2":
        return A * A
    if objective == "linear":
        return A
    raise ValueError(f"unknown objective {objective!r}")


def matching_objective(A, X, objective: str = "l2") -> float:
    """``||A * X||_2`` (or ``sum(A * X)`` for the linear objective)."""
    A = _values(A)
    X = X.values if isinstance(X, MatchingMatrix) else np.asarray(X)
    masked = A * X
    if objective == "l2":
        return math.sqrt(float(np.sum(masked * masked)))
    return float(np.sum(masked))


def _best_total(weights: np.ndarray) -> float:
    if weights.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def solve_matching(A, objective: str = "l2") -> MatchingMatrix:
    """Optimal matching of rows (trajectories) to columns (detections).

    Zero-affinity cells are never matched.
    """
    A = _values(A)
    K, Q = A.shape
    X = np.zeros((K, Q), dtype=np.int8)
    if K == 0 or Q == 0:
        return MatchingMatrix(X)
    weights = _weights(A, objective)
    best = _best_total(weights)
    if best == 0.0:
        return MatchingMatrix(X)
    tol = _REL_TOL * best

    # fix rows in order, each to the smallest column that keeps the optimum
    free_rows = list(range(K))
    free_cols = list(range(Q))
    fixed = 0.0
    for u in range(K):
        free_rows.remove(u)
        rest_rows = np.array(free_rows, dtype=int)
        chosen = None
        for v in free_cols:
            if weights[u, v] <= 0:
                continue
            rest_cols = np.array([c for c in free_cols if c != v], dtype=int)
            rest = _best_total(weights[np.ix_(rest_rows, rest_cols)]) if len(rest_rows) and len(rest_cols) else 0.0
            if fixed + weights[u, v] + rest >= best - tol:
                chosen = v
                break
        if chosen is not None:
            X[u, chosen] = 1
            fixed += weights[u, chosen]
            free_cols.remove(chosen)
    return MatchingMatrix(X)


def brute_force_matching(A, objective: str = "l2") -> Tuple[float, MatchingMatrix]:
    """Exhaustive optimum, for checking ``solve_matching`` on small inputs.

    With nonnegative affinities every partial assignment is dominated by a
    full one that extends it, so enumerating the ``min(K, Q)``-sized
    injections covers every optimum.  Zero cells are dropped from the
    returned matrix.
    """
    A = _values(A)
    K, Q = A.shape
    if max(K, Q) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} rows/columns")
    X = np.zeros((K, Q), dtype=np.int8)
    if K == 0 or Q == 0:
        return 0.0, MatchingMatrix(X)
    weights = _weights(A, objective)
    transpose = K > Q
    W = weights.T if transpose else weights
    n, m = W.shape
    perms = np.array(list(itertools.permutations(range(m), n)), dtype=int)
    totals = W[np.arange(n), perms].sum(axis=1)
    best_perm = perms[int(np.argmax(totals))]
    for r, c in enumerate(best_perm):
        u, v = (c, r) if transpose else (r, c)
        if A[u, v] > 0:
            X[u, v] = 1
    result = MatchingMatrix(X)
    return matching_objective(A, result, objective), result


@dataclass
class MatchResult:
    pairs: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_trajs: List[int] = field(default_factory=list)
    unmatched_dets: List[int] = field(default_factory=list)


def gate(X, A, threshold: float) -> MatchResult:
    """Split a matching into kept pairs and unmatched rows/columns.

    Pairs whose affinity is below ``threshold`` are dissolved.
    """
    A = _values(A)
    Xv = X.values if isinstance(X, MatchingMatrix) else np.asarray(X)
    if Xv.shape != A.shape:
        raise ValueError(f"shape mismatch: X{Xv.shape} vs A{A.shape}")
    K, Q = A.shape
    pairs = []
    row_used = np.zeros(K, dtype=bool)
    col_used = np.zeros(Q, dtype=bool)
    for u, v in zip(*np.nonzero(Xv)):
        if A[u, v] >= threshold:
            pairs.append((int(u), int(v)))
            row_used[u] = col_used[v] = True
    return MatchResult(
        pairs=pairs,
        unmatched_trajs=[int(u) for u in np.flatnonzero(~row_used)],
        unmatched_dets=[int(v) for v in np.flatnonzero(~col_used)],
    )
