"""Weighted isotonic regression: PAVA solver plus a max-min oracle.

``pava`` is the production solver (compiled kernel when available);
``maxmin_oracle`` evaluates the closed-form max-min characterization of the
solution directly and exists so the solver can be tested against an
independent route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import pava_kernel


@dataclass(frozen=True)
class IsotonicProblem:
    """Responses y with strictly positive weights r, equal lengths."""

    y: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        r = np.ascontiguousarray(self.r, dtype=float)
        if y.ndim != 1 or y.shape != r.shape or y.size < 1:
            raise ValueError("y and r must be 1-d arrays of equal length >= 1")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if not np.all(r > 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "r", r)


def pava(problem: IsotonicProblem) -> np.ndarray:
    """Minimize sum r_i (y_i - a_i)^2 over nondecreasing a, by adjacent
    block pooling (O(n))."""
    return np.asarray(pava_kernel(problem.y, problem.r))


def maxmin_oracle(problem: IsotonicProblem) -> np.ndarray:
    """Direct evaluation of a_j = max_{s<=j} min_{t>=j} of the weighted
    block means over [s, t].

    O(n^2) time and memory; intended for testing against ``pava``.
    """
    y, r = problem.y, problem.r
    n = y.size
    cy = np.concatenate([[0.0], np.cumsum(r * y)])
    cr = np.concatenate([[0.0], np.cumsum(r)])
    # mean[s, t] of block y[s..t]; invalid (t < s) entries become +inf
    num = cy[None, 1:] - cy[:n, None]
    den = cr[None, 1:] - cr[:n, None]
    mean = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)
    # min over t >= j (suffix minimum along t)
    suffix_min = np.minimum.accumulate(mean[:, ::-1], axis=1)[:, ::-1]
    # max over s <= j (prefix maximum along s), ignoring s > j
    s_idx = np.arange(n)
    masked = np.where(s_idx[:, None] > s_idx[None, :], -np.inf, suffix_min)
    prefix_max = np.maximum.accumulate(masked, axis=0)
    return np.diagonal(prefix_max).copy()
