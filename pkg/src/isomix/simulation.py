"""Monte-Carlo harness: data generators for the three benchmark experiments
and the metric suite (pointwise bias/sd/coverage, integrated absolute bias,
average pointwise variance, type-I error and power).

Component event times are drawn by numerical inversion of closed-form CDFs;
censoring times are uniform on (0, c_max) with c_max calibrated by bisection
so the expected censoring rate hits the target.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import MixtureSample, TimeGrid, even_grid, validate_sample
from .errors import CalibrationFailure, EstimationError, TooManyFailures
from .estimators import EmConfig, estimate
from .inference import bootstrap_bands, permutation_test

MIXTURE_VECTORS = ((1.0, 0.0), (0.6, 0.4), (0.2, 0.8), (0.16, 0.84))


# -- closed-form experiment CDFs (module-level so specs pickle) ---------------

def exp1_f1(t):
    t = np.asarray(t, dtype=float)
    return np.clip((1.0 - np.exp(-np.clip(t, 0, 10))) / (1.0 - math.exp(-10)), 0, 1)


def exp1_f2(t):
    t = np.asarray(t, dtype=float)
    return np.clip((1.0 - np.exp(-np.clip(t, 0, 10) / 2.8))
                   / (1.0 - math.exp(-10 / 2.8)), 0, 1)


_EXP2_F1_AT_100 = 0.8 / (1.0 + math.exp(-4.0))
_EXP2_F2_AT_100 = 0.2 / (1.0 + math.exp(-4.0))


def exp2_f1(t):
    # printed pieces decrease by ~0.0076 at t=100; a running max restores
    # monotonicity so inversion is well defined
    t = np.asarray(t, dtype=float)
    logistic = 0.8 / (1.0 + np.exp(-(t - 80.0) / 5.0))
    linear = 0.678 + 0.001 * np.clip(t, 100.0, 300.0)
    return np.where(t < 100.0, np.where(t < 0, 0.0, logistic),
                    np.maximum(_EXP2_F1_AT_100, linear))


def exp2_f2(t):
    t = np.asarray(t, dtype=float)
    logistic = 0.2 / (1.0 + np.exp(-(t - 80.0) / 5.0))
    linear = -0.205 + 0.004 * np.clip(t, 100.0, 300.0)
    return np.where(t < 100.0, np.where(t < 0, 0.0, logistic),
                    np.maximum(_EXP2_F2_AT_100, linear))


def exp3_f1(t):
    t = np.asarray(t, dtype=float)
    return np.clip((1.0 - np.exp(-np.clip(t, 0, 10) / 4.0))
                   / (1.0 - math.exp(-2.5)), 0, 1)


def exp3_f2(t):
    t = np.asarray(t, dtype=float)
    return np.clip((1.0 - np.exp(-np.clip(t, 0, 5) / 2.0))
                   / (1.0 - math.exp(-2.5)), 0, 1)


@dataclass(frozen=True)
class ExperimentSpec:
    exp_id: str
    cdfs: tuple                      # two vectorized component CDFs
    uppers: tuple[float, float]      # per-component support upper bound
    metrics_upper: float             # range for the 50-point metric grid
    iab_uppers: tuple[float, float]  # per-component IAB integration range
    n: int = 500
    censoring: float = 0.0
    n_reps: int = 500
    seed: int = 0
    mixture_vectors: tuple = MIXTURE_VECTORS
    mixture_probs: tuple = (0.25, 0.25, 0.25, 0.25)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)


def experiment(exp_id: int, n: int = 500, censoring: float = 0.0,
               n_reps: int = 500, seed: int = 0, null: bool = False) -> ExperimentSpec:
    """Build one of the three benchmark designs; ``null=True`` replaces the
    second component by the form of the first (the H0 design)."""
    table = {
        1: ((exp1_f1, exp1_f2), (10.0, 10.0), 10.0, (10.0, 10.0)),
        2: ((exp2_f1, exp2_f2), (300.0, 300.0), 100.0, (100.0, 100.0)),
        3: ((exp3_f1, exp3_f2), (10.0, 5.0), 10.0, (10.0, 5.0)),
    }
    if exp_id not in table:
        raise ValueError(f"unknown experiment id {exp_id!r}")
    cdfs, uppers, m_up, iab_up = table[exp_id]
    if null:
        cdfs = (cdfs[0], cdfs[0])
        uppers = (uppers[0], uppers[0])
        iab_up = (iab_up[0], iab_up[0])
    tag = f"{exp_id}{'H0' if null else ''}"
    return ExperimentSpec(exp_id=tag, cdfs=cdfs, uppers=uppers,
                          metrics_upper=m_up, iab_uppers=iab_up, n=n,
                          censoring=censoring, n_reps=n_reps, seed=seed)


def mixture_cdf(spec: ExperimentSpec, t):
    """Marginal CDF of the pooled event time."""
    mean_lam = float(np.dot([v[0] for v in spec.mixture_vectors],
                            spec.mixture_probs))
    return mean_lam * spec.cdfs[0](t) + (1.0 - mean_lam) * spec.cdfs[1](t)


def _invert_cdf(cdf, u: np.ndarray, upper: float) -> np.ndarray:
    """Vectorized bisection of F(s) = u on [0, upper]; u above F(upper)
    maps to +inf (residual mass)."""
    top = float(cdf(upper))
    s = np.full(u.shape, np.inf)
    inside = u <= top
    lo = np.zeros(inside.sum())
    hi = np.full(inside.sum(), upper)
    ui = u[inside]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < ui
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    s[inside] = hi
    return s


def calibrate_censoring(spec: ExperimentSpec, target: float | None = None) -> float:
    """Upper bound c_max of the uniform censoring time such that
    E[P(S > C)] matches the target censoring rate (bisection; the expected
    rate is computed by trapezoidal quadrature of the mixture survival)."""
    target = spec.censoring if target is None else target
    key = ("cmax", target)
    if key in spec._cache:
        return spec._cache[key]
    if not 0.0 < target < 1.0:
        raise CalibrationFailure(f"target rate {target} not in (0, 1)")

    def rate(cmax: float) -> float:
        t = np.linspace(0.0, cmax, 4001)
        return float(np.trapezoid(1.0 - mixture_cdf(spec, t), t) / cmax)

    lo = 1e-9 * max(spec.uppers)
    hi = max(spec.uppers)
    doublings = 0
    while rate(hi) > target:
        hi *= 2.0
        doublings += 1
        if doublings > 40:
            raise CalibrationFailure(
                f"censoring rate {target} unreachable (residual mass too large)")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if rate(mid) > target:
            lo = mid
        else:
            hi = mid
    cmax = 0.5 * (lo + hi)
    if abs(rate(cmax) - target) > 1e-3:
        raise CalibrationFailure(f"calibration did not converge for {target}")
    spec._cache[key] = cmax
    return cmax


def sample_experiment(spec: ExperimentSpec, seed) -> tuple[MixtureSample, dict]:
    """Draw one dataset; returns the sample and the latent truth
    (component labels, event and censoring times)."""
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(spec.mixture_vectors), size=spec.n,
                      p=spec.mixture_probs)
    vecs = np.array(spec.mixture_vectors)[pick]
    lam = vecs[:, 0]
    labels = (rng.random(spec.n) < lam).astype(int)  # 1 => component 1
    u = rng.random(spec.n)
    s = np.empty(spec.n)
    for comp in (0, 1):
        members = labels == (1 - comp)
        s[members] = _invert_cdf(spec.cdfs[comp], u[members], spec.uppers[comp])
    if spec.censoring > 0:
        cmax = calibrate_censoring(spec)
        c = rng.uniform(0.0, cmax, spec.n)
    else:
        c = np.full(spec.n, np.inf)
    x = np.minimum(s, c)
    delta = (s <= c).astype(int)
    # residual-mass draws with no finite censoring time: record them as
    # censored at the end of the support
    stuck = ~np.isfinite(x)
    if np.any(stuck):
        x[stuck] = max(spec.uppers)
        delta[stuck] = 0
    sample = validate_sample(list(zip(x, delta, map(tuple, vecs))))
    return sample, {"labels": labels, "event_times": s, "censor_times": c}


# -- metrics -------------------------------------------------------------------

@dataclass(frozen=True)
class MethodMetrics:
    bias: np.ndarray              # (h, K)
    emp_sd: np.ndarray            # (h, K)
    mean_est_sd: np.ndarray | None
    coverage: np.ndarray | None
    iab: np.ndarray               # (K,)
    avg_variance: np.ndarray      # (K,)
    avg_coverage: np.ndarray | None
    n_failed: int


@dataclass(frozen=True)
class MetricsReport:
    spec: ExperimentSpec
    grid: TimeGrid
    metric_idx: np.ndarray        # indices of the 50 even metric points
    truth: np.ndarray             # (h, K)
    methods: dict[str, MethodMetrics]
    n_reps: int
    boot_reps: int
    seed: int


def truth_values(spec: ExperimentSpec, grid: TimeGrid) -> np.ndarray:
    return np.column_stack([cdf(grid.times) for cdf in spec.cdfs])


def metric_grid(spec: ExperimentSpec, eval_times=()) -> tuple[TimeGrid, np.ndarray]:
    """The 50-point even metric grid, joined with any extra evaluation times;
    returns the grid and the indices of the 50 metric points within it."""
    base = even_grid(50, 0.0, spec.metrics_upper)
    times = np.unique(np.concatenate([base, np.asarray(eval_times, dtype=float)]))
    idx = np.searchsorted(times, base)
    return TimeGrid(times), idx


def run_replications(spec: ExperimentSpec, methods=("em_pava",),
                     eval_times=(), boot_reps: int = 100, level: float = 0.95,
                     config: EmConfig = EmConfig(), jobs: int = 1) -> MetricsReport:
    """Run ``spec.n_reps`` Monte-Carlo replicates and aggregate all metrics.

    ``boot_reps=0`` skips the per-replicate bootstrap (no estimated-sd or
    coverage columns).  Failed replicate/method estimations are dropped and
    counted.
    """
    grid, idx = metric_grid(spec, eval_times)
    truth = truth_values(spec, grid)
    args = [(spec, grid, methods, boot_reps, level, config, r)
            for r in range(spec.n_reps)]
    results = _pmap(_one_metric_rep, args, jobs)

    per_method: dict[str, MethodMetrics] = {}
    for method in methods:
        vals = [r[method]["values"] for r in results if method in r]
        n_failed = spec.n_reps - len(vals)
        if not vals:
            raise TooManyFailures(f"all replicates failed for {method!r}")
        stack = np.stack(vals)                      # (R_ok, h, K)
        mean_est = stack.mean(axis=0)
        bias = mean_est - truth
        emp_sd = stack.std(axis=0, ddof=1)
        if boot_reps:
            sds = np.stack([r[method]["sd"] for r in results if method in r])
            covered = np.stack([
                (r[method]["lo"] <= truth) & (truth <= r[method]["hi"])
                for r in results if method in r
            ])
            mean_est_sd = sds.mean(axis=0)
            coverage = covered.mean(axis=0)
            avg_cov = coverage[idx].mean(axis=0)
        else:
            mean_est_sd = coverage = avg_cov = None
        dt = spec.metrics_upper / 50.0
        iab = np.empty(2)
        for comp in (0, 1):
            keep = grid.times[idx] <= spec.iab_uppers[comp] + 1e-12
            iab[comp] = dt * np.sum(np.abs(bias[idx[keep], comp]))
        avg_var = (emp_sd[idx] ** 2).mean(axis=0)
        per_method[method] = MethodMetrics(
            bias=bias, emp_sd=emp_sd, mean_est_sd=mean_est_sd,
            coverage=coverage, iab=iab, avg_variance=avg_var,
            avg_coverage=avg_cov, n_failed=n_failed)
    return MetricsReport(spec=spec, grid=grid, metric_idx=idx, truth=truth,
                         methods=per_method, n_reps=spec.n_reps,
                         boot_reps=boot_reps, seed=spec.seed)


def _one_metric_rep(arg):
    spec, grid, methods, boot_reps, level, config, r = arg
    sample, _ = sample_experiment(spec, (spec.seed, 0xD0, r))
    out = {}
    for method in methods:
        try:
            if boot_reps:
                sub_seed = int(np.random.default_rng((spec.seed, 0xB0, r))
                               .integers(2**62))
                boot = bootstrap_bands(sample, grid, method, n_boot=boot_reps,
                                       level=level, seed=sub_seed, config=config)
                out[method] = {"values": boot.curves.values, "sd": boot.sd,
                               "lo": boot.lo, "hi": boot.hi}
            else:
                rep = estimate(sample, grid, method, config)
                out[method] = {"values": rep.curves.values}
        except EstimationError:
            continue
    return out


# -- type-I error and power -----------------------------------------------------

NOMINAL_LEVELS = (0.01, 0.05, 0.10, 0.20)


def power_study(h0_spec: ExperimentSpec, h1_spec: ExperimentSpec,
                methods=("em_pava",), n_perm: int = 1000,
                levels=NOMINAL_LEVELS, config: EmConfig = EmConfig(),
                jobs: int = 1) -> dict:
    """Empirical rejection rates of the permutation test under both designs.

    Returns {method: {"h0"|"h1": {level: rate}}}; replicate counts come from
    each spec's ``n_reps``.
    """
    out: dict = {m: {} for m in methods}
    for arm, spec in (("h0", h0_spec), ("h1", h1_spec)):
        args = [(spec, methods, n_perm, config, arm, r)
                for r in range(spec.n_reps)]
        pvals = _pmap(_one_power_rep, args, jobs)
        for method in methods:
            ps = np.array([p[method] for p in pvals if method in p])
            out[method][arm] = {lvl: float(np.mean(ps <= lvl)) for lvl in levels}
            out[method][f"{arm}_pvalues"] = ps
    return out


def _one_power_rep(arg):
    spec, methods, n_perm, config, arm, r = arg
    sample, _ = sample_experiment(spec, (spec.seed, 0xA0, r))
    grid, _ = metric_grid(spec)
    out = {}
    for method in methods:
        seed = int(np.random.default_rng((spec.seed, 0xA1, r)).integers(2**62))
        try:
            res = permutation_test(sample, grid, method, n_perm=n_perm,
                                   seed=seed, config=config)
        except EstimationError:
            continue
        out[method] = res.p_value
    return out


def _pmap(fn, args, jobs: int):
    if jobs <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * jobs))))
