"""Randomized oracle checks runnable without pytest (``panotrack selftest``)."""

from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np

from .association import brute_force_matching, matching_objective, solve_matching
from .core import PanoBox
from .geometry import circular_iou


def _random_matrix(rng: np.random.Generator, integer: bool) -> np.ndarray:
    k, q = rng.integers(1, 8, size=2)
    if integer:
        return rng.integers(0, 10, size=(k, q)).astype(float)
    return rng.uniform(0, 3, size=(k, q))


def check_assignment(n_cases: int = 200, seed: int = 0) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(n_cases):
        integer = case % 2 == 0
        A = _random_matrix(rng, integer)
        X = solve_matching(A)
        got = matching_objective(A, X)
        want, _ = brute_force_matching(A)
        gap = abs(got - want)
        worst = max(worst, gap)
        if (integer and got != want) or gap > 1e-9:
            return False, f"case {case}: solver {got!r} vs brute force {want!r}"
    return True, f"{n_cases} matrices, max |gap| = {worst:.3g}"


def check_shift_invariance(width: int = 64, n_pairs: int = 20, seed: int = 0) -> Tuple[bool, str]:
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        a = PanoBox(int(rng.integers(0, width)), int(rng.integers(0, 10)),
                    int(rng.integers(1, width // 2)), int(rng.integers(1, 10)), width)
        b = PanoBox(int(rng.integers(0, width)), int(rng.integers(0, 10)),
                    int(rng.integers(1, width // 2)), int(rng.integers(1, 10)), width)
        base = circular_iou(a, b)
        if not math.isclose(base, circular_iou(b, a), rel_tol=0, abs_tol=0):
            return False, "asymmetric IoU"
        for delta in range(width):
            if circular_iou(a.shifted(delta), b.shifted(delta)) != base:
                return False, f"IoU changed under shift {delta}"
    return True, f"{n_pairs} pairs x {width} shifts"


CHECKS: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
    ("assignment matches brute force", check_assignment),
    ("circular IoU shift invariance", check_shift_invariance),
]


def run_all() -> List[Tuple[str, bool, str]]:
    return [(name, *fn()) for name, fn in CHECKS]
