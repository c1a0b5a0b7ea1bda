"""Mixture-distribution estimators.

``em_pava`` is the main estimator: an EM algorithm whose M-step is a
weighted isotonic regression, so every iterate (and the final estimate) is a
genuine CDF.  ``binomial_pointwise_em`` is the unconstrained pointwise
binomial-likelihood EM baseline; ``npmle_type1`` / ``npmle_type2`` are the
classical NPMLE baselines (their output may leave [0,1] or be non-monotone
and is returned unconstrained).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ._kernels import em_pava_run
from .core import CurveSet, MixtureSample, TimeGrid, eval_step
from .errors import NotIdentifiable, SingularDesign
from .survival import KmCurve, kaplan_meier, km_to_cdf

METHODS = (
    "em_pava",
    "binomial_pointwise",
    "npmle_type1",
    "npmle_type1_weighted",
    "npmle_type2",
    "kaplan_meier",
)


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 500
    tolerance: float = 1e-8
    initialization: str = "pooled_km"  # or "uniform_linear"
    clamp_eps: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.initialization not in ("pooled_km", "uniform_linear"):
            raise ValueError(f"unknown initialization {self.initialization!r}")


@dataclass(frozen=True)
class EmState:
    """Imputation weight matrices of one E-step (all n x h)."""

    w: np.ndarray
    u: np.ndarray
    v: np.ndarray
    r1: np.ndarray
    r2: np.ndarray


@dataclass(frozen=True)
class EstimateReport:
    curves: CurveSet
    method: str
    iterations: int = 0
    converged: bool = True
    objective: float | None = None
    trace: np.ndarray | None = None
    warnings: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)


def _check_estimable(sample: MixtureSample, k: int = 2) -> None:
    if sample.k != k:
        raise NotIdentifiable(f"estimator supports K={k}, sample has K={sample.k}")
    if not (sample.identifiable or sample.fully_labeled):
        raise NotIdentifiable(
            "mixture support has fewer than K linearly independent vectors"
        )


# -- EM-PAVA -----------------------------------------------------------------

def _group_layout(sample: MixtureSample, grid: TimeGrid):
    """Aggregate the sample by distinct mixture vector for the EM kernel."""
    t = grid.times
    key = {vec: g for g, (vec, _) in enumerate(sample.support)}
    gid = np.fromiter((key[tuple(row)] for row in sample.mix), dtype=np.int64,
                      count=sample.n)
    m = len(sample.support)
    h = t.size
    lam_g = np.array([vec[0] for vec, _ in sample.support])
    grp_n = np.zeros(m, dtype=np.int64)
    cnt_le = np.zeros((m, h), dtype=np.int64)
    cnt_cens_le = np.zeros((m, h), dtype=np.int64)
    cens_lam_parts = []
    cens_gidx_parts = []
    cens_off = np.zeros(m + 1, dtype=np.int64)
    for g in range(m):
        members = gid == g
        xg = np.sort(sample.times[members])
        grp_n[g] = xg.size
        cnt_le[g] = np.searchsorted(xg, t, side="right")
        xc = np.sort(sample.times[members & (sample.status == 0)])
        cnt_cens_le[g] = np.searchsorted(xc, t, side="right")
        cens_gidx_parts.append(np.searchsorted(t, xc, side="right") - 1)
        cens_lam_parts.append(np.full(xc.size, lam_g[g]))
        cens_off[g + 1] = cens_off[g] + xc.size
    cens_gidx = (np.concatenate(cens_gidx_parts) if m else np.empty(0, np.int64))
    cens_lam = (np.concatenate(cens_lam_parts) if m else np.empty(0))
    return (lam_g, grp_n, cnt_le, cnt_cens_le,
            cens_lam, cens_gidx.astype(np.int64), cens_off)


def _initial_curve(sample: MixtureSample, grid: TimeGrid, initialization: str):
    if initialization == "uniform_linear":
        return np.arange(1, grid.h + 1) / (grid.h + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pooled = kaplan_meier(sample.times, sample.status)
    return km_to_cdf(pooled, grid)


def em_pava(sample: MixtureSample, grid: TimeGrid,
            config: EmConfig = EmConfig()) -> EstimateReport:
    """EM with a weighted-isotonic M-step; returns monotone curves in [0,1]."""
    _check_estimable(sample)
    layout = _group_layout(sample, grid)
    f0 = _initial_curve(sample, grid, config.initialization)
    f1, f2, trace, n_iter, converged = em_pava_run(
        *layout, f0, f0.copy(),
        config.tolerance, config.max_iterations, config.clamp_eps,
    )
    curves = CurveSet(grid, np.column_stack([f1, f2]))
    return EstimateReport(
        curves=curves, method="em_pava", iterations=n_iter, converged=converged,
        objective=float(trace[-1]), trace=trace,
    )


def em_pava_path(sample: MixtureSample, grid: TimeGrid,
                 config: EmConfig = EmConfig()):
    """Run EM-PAVA one iteration at a time, yielding every iterate.

    Returns (list of (h, 2) iterate matrices, objective trace).  Useful for
    checking monotone ascent and per-iterate CDF validity.
    """
    _check_estimable(sample)
    layout = _group_layout(sample, grid)
    f1 = _initial_curve(sample, grid, config.initialization)
    f2 = f1.copy()
    iterates = []
    trace = []
    for _ in range(config.max_iterations):
        f1n, f2n, q, _, _ = em_pava_run(
            *layout, f1, f2, 0.0, 1, config.clamp_eps,
        )
        iterates.append(np.column_stack([f1n, f2n]))
        trace.append(float(q[0]))
        delta = max(np.max(np.abs(f1n - f1)), np.max(np.abs(f2n - f2)))
        f1, f2 = f1n, f2n
        if delta < config.tolerance:
            break
    return iterates, np.array(trace)


def estep_weights(curves: CurveSet, sample: MixtureSample, grid: TimeGrid,
                  clamp_eps: float = 1e-12) -> EmState:
    """Dense E-step: imputed survival indicators w and membership
    posteriors u (given S <= t_j) and v (given S > t_j), plus the isotonic
    aggregation weights r1, r2."""
    t = grid.times
    x = sample.times
    delta = sample.status
    lam = sample.mix[:, 0]
    f1 = curves.values[:, 0]
    f2 = curves.values[:, 1]

    f1x = eval_step(t, f1, x)
    f2x = eval_step(t, f2, x)
    rho_x = lam * (1.0 - f1x) + (1.0 - lam) * (1.0 - f2x)

    below = x[:, None] <= t[None, :]
    rho_j = lam[:, None] * (1.0 - f1)[None, :] + (1.0 - lam[:, None]) * (1.0 - f2)[None, :]
    sig_j = 1.0 - rho_j

    ratio = np.where(
        (rho_x >= clamp_eps)[:, None],
        rho_j / np.maximum(rho_x, clamp_eps)[:, None],
        0.0,
    )
    w = (~below).astype(float) + (1 - delta)[:, None] * below * ratio

    lam_j = np.broadcast_to(lam[:, None], w.shape)
    u = np.where(sig_j > 0, lam_j * f1[None, :] / np.where(sig_j > 0, sig_j, 1.0), lam_j)
    v = np.where(rho_j > 0, lam_j * (1.0 - f1)[None, :] / np.where(rho_j > 0, rho_j, 1.0),
                 lam_j)
    r1 = u * (1.0 - w) + v * w
    r2 = (1.0 - u) * (1.0 - w) + (1.0 - v) * w
    return EmState(w=w, u=u, v=v, r1=r1, r2=r2)


# -- pointwise binomial-likelihood EM (no monotonicity constraint) -----------

def _solve_point(lam: np.ndarray, wj: np.ndarray, f1: float, f2: float,
                 eps: float = 1e-12):
    """Maximize sum_i [(1-w_i) log(sig_i) + w_i log(1-sig_i)] over
    (F1, F2) in [0,1]^2, where sig_i = lam_i F1 + (1-lam_i) F2.

    Damped (projected) Newton with an L-BFGS-B fallback.  Returns
    (f1, f2, converged).
    """
    fail = 1.0 - wj
    if fail.sum() <= eps:
        return 0.0, 0.0, True
    if wj.sum() <= eps:
        return 1.0, 1.0, True

    has1 = np.any(lam > 0)
    has2 = np.any(lam < 1)
    if np.all((lam == 0) | (lam == 1)):
        # fully labeled: the two equations decouple into group means
        if has1:
            f1 = float(np.mean(fail[lam == 1]))
        if has2:
            f2 = float(np.mean(fail[lam == 0]))
        return f1, f2, True

    def negll(p):
        sig = np.clip(lam * p[0] + (1 - lam) * p[1], eps, 1 - eps)
        return -float(np.sum(fail * np.log(sig) + wj * np.log(1 - sig)))

    p = np.array([min(max(f1, eps), 1 - eps), min(max(f2, eps), 1 - eps)])
    ok = False
    for _ in range(200):
        sig = np.clip(lam * p[0] + (1 - lam) * p[1], eps, 1 - eps)
        rho = 1.0 - sig
        resid = fail / sig - wj / rho
        g = np.array([np.sum(lam * resid), np.sum((1 - lam) * resid)])
        curv = fail / sig**2 + wj / rho**2
        hess = np.array([
            [np.sum(lam**2 * curv), np.sum(lam * (1 - lam) * curv)],
            [np.sum(lam * (1 - lam) * curv), np.sum((1 - lam) ** 2 * curv)],
        ])
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, g, rcond=None)[0]
        # KKT check on the [0,1] box
        active = ((p <= eps) & (g < 0)) | ((p >= 1 - eps) & (g > 0))
        if np.max(np.abs(np.where(active, 0.0, g))) < 1e-10 * (1 + len(lam)):
            ok = True
            break
        base = negll(p)
        scale = 1.0
        for _ in range(60):
            cand = np.clip(p + scale * step, 0.0, 1.0)
            if negll(cand) <= base + 1e-15:
                break
            scale *= 0.5
        else:
            break
        if np.max(np.abs(cand - p)) < 1e-14:
            # stalled against the box; the KKT test at the top of the next
            # iteration decides whether this is actually an optimum
            p = cand
            continue
        p = cand
    if not ok:
        res = optimize.minimize(negll, p, method="L-BFGS-B",
                                bounds=[(0.0, 1.0), (0.0, 1.0)],
                                options={"ftol": 1e-15, "gtol": 1e-12})
        if res.fun <= negll(p):
            p = res.x
        ok = bool(res.success)
    return float(p[0]), float(p[1]), ok


def binomial_pointwise_em(sample: MixtureSample, grid: TimeGrid,
                          config: EmConfig = EmConfig()) -> EstimateReport:
    """Pointwise binomial-likelihood EM: each grid point is estimated
    separately, with no monotonicity constraint."""
    _check_estimable(sample)
    t = grid.times
    x = sample.times
    delta = sample.status
    lam = sample.mix[:, 0]
    f = np.column_stack([_initial_curve(sample, grid, config.initialization)] * 2)
    below = x[:, None] <= t[None, :]
    solved_ok = np.ones(grid.h, dtype=bool)
    converged = False
    n_iter = 0
    for _ in range(config.max_iterations):
        n_iter += 1
        f1x = eval_step(t, f[:, 0], x)
        f2x = eval_step(t, f[:, 1], x)
        rho_x = lam * (1.0 - f1x) + (1.0 - lam) * (1.0 - f2x)
        rho_j = (lam[:, None] * (1.0 - f[:, 0])[None, :]
                 + (1.0 - lam[:, None]) * (1.0 - f[:, 1])[None, :])
        ratio = np.where((rho_x >= config.clamp_eps)[:, None],
                         rho_j / np.maximum(rho_x, config.clamp_eps)[:, None], 0.0)
        w = (~below).astype(float) + (1 - delta)[:, None] * below * ratio
        fn = np.empty_like(f)
        for j in range(grid.h):
            f1, f2, ok = _solve_point(lam, w[:, j], f[j, 0], f[j, 1])
            fn[j] = (f1, f2)
            solved_ok[j] = ok
        change = np.max(np.abs(fn - f))
        f = fn
        if change < config.tolerance:
            converged = True
            break
    curves = CurveSet(grid, f, constrained=False)
    warns = () if solved_ok.all() else (
        f"no interior root at {int((~solved_ok).sum())} grid points; "
        "boundary optimum used",)
    return EstimateReport(curves=curves, method="binomial_pointwise",
                          iterations=n_iter, converged=converged,
                          warnings=warns, details={"solved_ok": solved_ok})


# -- NPMLE baselines ----------------------------------------------------------

def _subgroup_km(sample: MixtureSample) -> list[KmCurve]:
    key = {vec: g for g, (vec, _) in enumerate(sample.support)}
    gid = np.fromiter((key[tuple(row)] for row in sample.mix), dtype=np.int64,
                      count=sample.n)
    curves = []
    for g in range(len(sample.support)):
        members = gid == g
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            curves.append(kaplan_meier(sample.times[members],
                                       sample.status[members]))
    return curves

def npmle_type1(sample: MixtureSample, grid: TimeGrid,
                weighted: bool = False) -> EstimateReport:
    """Type I NPMLE: per-support-subgroup Kaplan-Meier stacked through a
    least-squares design; optionally weighted by inverse Greenwood variances.

    The output is unconstrained: it may be negative or non-monotone.
    """
    m = len(sample.support)
    k = sample.k
    if m < k:
        raise SingularDesign(f"need at least {k} support vectors, have {m}")
    umat = np.array([vec for vec, _ in sample.support])
    utu = umat.T @ umat
    if np.linalg.matrix_rank(utu) < k:
        raise SingularDesign("support design matrix U'U is singular")

    km = _subgroup_km(sample)
    s_mat = np.column_stack([c.survival_at(grid.times) for c in km])  # (h, m)
    values = np.empty((grid.h, k))
    fallbacks = 0
    if not weighted:
        values = np.linalg.solve(utu, umat.T @ (1.0 - s_mat).T).T
    else:
        var_mat = np.column_stack([c.variance_at(grid.times) for c in km])
        for j in range(grid.h):
            var = var_mat[j]
            if np.any(var <= 0):
                fallbacks += 1
                values[j] = np.linalg.solve(utu, umat.T @ (1.0 - s_mat[j]))
            else:
                uw = umat.T / var  # U' Sigma^{-1}
                values[j] = np.linalg.solve(uw @ umat, uw @ (1.0 - s_mat[j]))
    warns = ()
    if weighted and fallbacks:
        warns = (f"singular Sigma at {fallbacks} grid points; "
                 "unweighted solve used there",)
    curves = CurveSet(grid, values, constrained=False)
    method = "npmle_type1_weighted" if weighted else "npmle_type1"
    return EstimateReport(curves=curves, method=method, warnings=warns)


def npmle_type2(sample: MixtureSample, grid: TimeGrid,
                config: EmConfig = EmConfig()) -> EstimateReport:
    """Type II NPMLE: EM over latent membership with a weighted
    product-limit update."""
    _check_estimable(sample)
    x = sample.times
    delta = sample.status
    q = sample.mix
    k = sample.k
    events = np.unique(x[delta == 1])
    if events.size == 0:
        curves = CurveSet(grid, np.zeros((grid.h, k)), constrained=False)
        return EstimateReport(curves=curves, method="npmle_type2",
                              warnings=("all observations censored",))
    c = q.astype(float).copy()
    surv = np.ones((events.size, k))
    converged = False
    n_iter = 0
    for _ in range(config.max_iterations):
        n_iter += 1
        new_surv = np.empty_like(surv)
        for comp in range(k):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                km = kaplan_meier(x, delta, case_weights=c[:, comp])
            new_surv[:, comp] = km.survival_at(events)
        # membership update: density at events, survival at censorings
        prev = np.vstack([np.ones(k), new_surv[:-1]])
        jump = prev - new_surv
        pos = np.searchsorted(events, x, side="right") - 1
        sv = np.where(pos[:, None] >= 0, new_surv[np.maximum(pos, 0)], 1.0)
        dens = np.where((pos[:, None] >= 0) & (delta == 1)[:, None],
                        jump[np.maximum(pos, 0)], 0.0)
        num = np.where((delta == 1)[:, None], q * dens, q * sv)
        tot = num.sum(axis=1)
        good = tot > config.clamp_eps
        c = np.where(good[:, None], num / np.maximum(tot, config.clamp_eps)[:, None], c)
        change = np.max(np.abs(new_surv - surv))
        surv = new_surv
        if change < config.tolerance:
            converged = True
            break
    pos = np.searchsorted(events, grid.times, side="right") - 1
    s_grid = np.where(pos[:, None] >= 0, surv[np.maximum(pos, 0)], 1.0)
    curves = CurveSet(grid, 1.0 - s_grid, constrained=False)
    return EstimateReport(curves=curves, method="npmle_type2",
                          iterations=n_iter, converged=converged)


def kaplan_meier_estimate(sample: MixtureSample, grid: TimeGrid) -> EstimateReport:
    """Per-component Kaplan-Meier for fully labeled samples."""
    if not sample.fully_labeled:
        raise NotIdentifiable("kaplan_meier method requires fully labeled data")
    values = np.zeros((grid.h, sample.k))
    warns = []
    for comp in range(sample.k):
        members = sample.mix[:, comp] == 1.0
        if not np.any(members):
            warns.append(f"component {comp + 1} has no labeled rows; curve is 0")
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            km = kaplan_meier(sample.times[members], sample.status[members])
        values[:, comp] = km_to_cdf(km, grid)
    return EstimateReport(curves=CurveSet(grid, values),
                          method="kaplan_meier", warnings=tuple(warns))


# -- goodness of fit -----------------------------------------------------------

def ks_gof_statistic(curves: CurveSet, parametric, n: int) -> float:
    """Kolmogorov-Smirnov-type statistic against fitted parametric CDFs:
    sqrt(n) * max over the grid of the summed componentwise absolute
    deviations.  No p-value is attached."""
    t = curves.grid.times
    dev = np.zeros(curves.grid.h)
    for comp, cdf in enumerate(parametric):
        dev += np.abs(curves.values[:, comp] - np.asarray(cdf(t), dtype=float))
    return float(np.sqrt(n) * np.max(dev))


def estimate(sample: MixtureSample, grid: TimeGrid, method: str = "em_pava",
             config: EmConfig = EmConfig()) -> EstimateReport:
    """Dispatch one of the named estimators."""
    if method == "em_pava":
        return em_pava(sample, grid, config)
    if method == "binomial_pointwise":
        return binomial_pointwise_em(sample, grid, config)
    if method == "npmle_type1":
        return npmle_type1(sample, grid, weighted=False)
    if method == "npmle_type1_weighted":
        return npmle_type1(sample, grid, weighted=True)
    if method == "npmle_type2":
        return npmle_type2(sample, grid, config)
    if method == "kaplan_meier":
        return kaplan_meier_estimate(sample, grid)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
