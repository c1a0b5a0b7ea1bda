"""Independent oracles used by the test suite.

`constrained_mle_oracle` maximizes the observed binomial log-likelihood of an
uncensored two-component mixture over the monotone CDF values at one or two
grid points, by exhaustive grid search (coarse pass at step 1/200, then an
exact pass at the requested resolution inside a window around the coarse
optimum; the log-likelihood is concave, so the coarse optimum brackets the
true one)."""

import numpy as np


def binomial_loglik(sample, grid_times, f1, f2):
    """Observed-data binomial log-likelihood for uncensored data.

    f1, f2 are CDF values per grid point (arrays of length h).
    """
    lam = sample.mix[:, 0][:, None]
    below = sample.times[:, None] <= grid_times[None, :]
    p = lam * np.asarray(f1)[None, :] + (1 - lam) * np.asarray(f2)[None, :]
    term = np.where(below, p, 1.0 - p)
    return float(np.sum(np.log(np.maximum(term, 1e-300))))


def _loglik_point(sample, t, a, b):
    """Log-likelihood contribution of one grid point over 2-D value grids
    a (F1 values, shape (A, 1)) and b (F2 values, shape (1, B))."""
    lam = sample.mix[:, 0]
    below = sample.times <= t
    total = np.zeros((a.shape[0], b.shape[1]))
    for lam_i, below_i in zip(lam, below):
        p = lam_i * a + (1 - lam_i) * b
        total += np.log(np.maximum(p if below_i else 1.0 - p, 1e-300))
    return total


def _axis(lo, hi, step):
    lo = max(0.0, lo)
    hi = min(1.0, hi)
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _search_h1(sample, t, av, bv):
    ll = _loglik_point(sample, t, av[:, None], bv[None, :])
    i, j = np.unravel_index(np.argmax(ll), ll.shape)
    return ll[i, j], av[i], bv[j]


def _search_h2(sample, grid_times, a1v, b1v, a2v, b2v):
    """Max of l1(a1,b1) + l2(a2,b2) subject to a1<=a2, b1<=b2; each value
    ranges over its own axis."""
    l1 = _loglik_point(sample, grid_times[0], a1v[:, None], b1v[None, :])
    l2 = _loglik_point(sample, grid_times[1], a2v[:, None], b2v[None, :])
    # m2[p, q] = max of l2 over indices >= (p, q)
    m2 = np.flip(np.maximum.accumulate(
        np.maximum.accumulate(np.flip(l2), axis=0), axis=1))
    # feasible (a2, b2) start indices for each (a1, b1)
    p0 = np.searchsorted(a2v, a1v - 1e-12)
    q0 = np.searchsorted(b2v, b1v - 1e-12)
    ok = (p0[:, None] < a2v.size) & (q0[None, :] < b2v.size)
    total = np.where(
        ok,
        l1 + m2[np.minimum(p0, a2v.size - 1)[:, None],
                np.minimum(q0, b2v.size - 1)[None, :]],
        -np.inf)
    i1, j1 = np.unravel_index(np.argmax(total), total.shape)
    sub = l2[p0[i1]:, q0[j1]:]
    i2, j2 = np.unravel_index(np.argmax(sub), sub.shape)
    f1 = (a1v[i1], a2v[p0[i1] + i2])
    f2 = (b1v[j1], b2v[q0[j1] + j2])
    return total[i1, j1], f1, f2


def constrained_mle_oracle(sample, grid_times, resolution=1e-4):
    """Constrained maximizer of the binomial log-likelihood; returns an
    (h, 2) array of CDF values."""
    grid_times = np.asarray(grid_times, dtype=float)
    h = grid_times.size
    if h not in (1, 2):
        raise ValueError("oracle supports h in {1, 2}")
    coarse = 1.0 / 200.0
    axis = _axis(0.0, 1.0, coarse)
    if h == 1:
        _, a, b = _search_h1(sample, grid_times[0], axis, axis)
        fine_a = _axis(a - 3 * coarse, a + 3 * coarse, resolution)
        fine_b = _axis(b - 3 * coarse, b + 3 * coarse, resolution)
        _, a, b = _search_h1(sample, grid_times[0], fine_a, fine_b)
        return np.array([[a, b]])
    _, f1, f2 = _search_h2(sample, grid_times, axis, axis, axis, axis)
    win = 3 * coarse
    _, f1, f2 = _search_h2(
        sample, grid_times,
        _axis(f1[0] - win, f1[0] + win, resolution),
        _axis(f2[0] - win, f2[0] + win, resolution),
        _axis(f1[1] - win, f1[1] + win, resolution),
        _axis(f2[1] - win, f2[1] + win, resolution))
    return np.array([[f1[0], f2[0]], [f1[1], f2[1]]])
