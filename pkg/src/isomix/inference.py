"""Permutation test for equality of the component CDFs, and bootstrap
pointwise bands.

Replicate RNG streams are derived from (seed, replicate index) so results do
not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CurveSet, MixtureSample, TimeGrid, eval_curve
from .errors import EstimationError, TooManyFailures
from .estimators import EmConfig, estimate


@dataclass(frozen=True)
class PermutationResult:
    s0: float
    s_perm: np.ndarray
    p_value: float
    n_perm: int
    seed: int


@dataclass(frozen=True)
class BootstrapResult:
    curves: CurveSet          # point estimate on the original sample
    sd: np.ndarray            # (h, K) pointwise standard deviation
    lo: np.ndarray            # (h, K) lower percentile band
    hi: np.ndarray            # (h, K) upper percentile band
    n_boot: int
    n_failed: int
    level: float
    seed: int


def _permuted_sample(sample: MixtureSample, perm) -> MixtureSample:
    """Couple permuted (time, status) pairs with the fixed ordered mixture
    vectors; the support is unchanged."""
    return MixtureSample(sample.times[perm], sample.status[perm], sample.mix,
                         sample.support, sample.identifiable)


def _resampled_sample(sample: MixtureSample, idx) -> MixtureSample:
    """Resample whole rows; the support (and identifiability) must be
    recomputed since rows are drawn with replacement."""
    mix = sample.mix[idx]
    uniq, counts = np.unique(mix, axis=0, return_counts=True)
    support = tuple((tuple(v), int(c)) for v, c in zip(uniq, counts))
    identifiable = np.linalg.matrix_rank(uniq) >= sample.k
    return MixtureSample(sample.times[idx], sample.status[idx], mix,
                         support, identifiable)


def _difference_statistic(curves: CurveSet, restrict_to=None) -> float:
    """sup over the grid (or a restricted time set) of |F1 - F2|."""
    if restrict_to is None:
        return float(np.max(np.abs(curves.values[:, 0] - curves.values[:, 1])))
    ts = np.asarray(restrict_to, dtype=float)
    d = np.abs(eval_curve(curves, 0, ts) - eval_curve(curves, 1, ts))
    return float(np.max(d))


def permutation_test(sample: MixtureSample, grid: TimeGrid,
                     method: str = "em_pava", n_perm: int = 1000,
                     restrict_to=None, seed: int = 0,
                     config: EmConfig = EmConfig()) -> PermutationResult:
    """Permute the (time, status) pairs against the fixed ordered mixture
    vectors and compare sup_t |F1 - F2| against its permutation
    distribution; p = #(s_k >= s0) / K."""
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    report = estimate(sample, grid, method, config)
    s0 = _difference_statistic(report.curves, restrict_to)
    s_perm = np.empty(n_perm)
    for k in range(n_perm):
        rng = np.random.default_rng((seed, k))
        perm = rng.permutation(sample.n)
        try:
            rep = estimate(_permuted_sample(sample, perm), grid, method, config)
        except EstimationError as exc:
            raise EstimationError(
                f"estimator failed on permutation replicate {k}: {exc}") from exc
        s_perm[k] = _difference_statistic(rep.curves, restrict_to)
    p = float(np.count_nonzero(s_perm >= s0)) / n_perm
    return PermutationResult(s0=s0, s_perm=s_perm, p_value=p,
                             n_perm=n_perm, seed=seed)


def bootstrap_bands(sample: MixtureSample, grid: TimeGrid,
                    method: str = "em_pava", n_boot: int = 100,
                    level: float = 0.95, seed: int = 0,
                    config: EmConfig = EmConfig()) -> BootstrapResult:
    """Nonparametric bootstrap over whole (time, status, mix) rows; returns
    pointwise sd and percentile bands.  Replicates that fail estimation are
    dropped; more than 10% failures aborts."""
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    base = estimate(sample, grid, method, config)
    reps = []
    failed = 0
    for b in range(n_boot):
        rng = np.random.default_rng((seed, b))
        idx = rng.integers(0, sample.n, sample.n)
        try:
            rep = estimate(_resampled_sample(sample, idx), grid, method, config)
        except EstimationError:
            failed += 1
            continue
        reps.append(rep.curves.values)
    if failed > 0.1 * n_boot:
        raise TooManyFailures(f"{failed}/{n_boot} bootstrap replicates failed")
    stack = np.stack(reps)  # (B_ok, h, K)
    sd = np.std(stack, axis=0, ddof=1)
    alpha = 1.0 - level
    lo = np.quantile(stack, alpha / 2, axis=0)
    hi = np.quantile(stack, 1 - alpha / 2, axis=0)
    return BootstrapResult(curves=base.curves, sd=sd, lo=lo, hi=hi,
                           n_boot=n_boot, n_failed=failed, level=level,
                           seed=seed)
