"""Pure-Python (numpy) implementations of the hot kernels.

Used as the fallback backend when the compiled extension is unavailable
(``ISOMIX_PURE_PYTHON=1`` forces it), and as the reference the extension is
tested against.

The EM kernel exploits the fact that the imputation weights depend on a
subject only through its mixture vector, observed time and censoring status:
observations are aggregated by distinct mixture vector (group), and the
per-grid-point sums needed by the isotonic M-step reduce to prefix sums over
the sorted censored times within each group.  One iteration costs
O(n + m*h) instead of O(n*h).
"""

from __future__ import annotations

import numpy as np

_TINY = 1e-300


def pava_kernel(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression by pool-adjacent-violators.

    Minimizes sum w_i (y_i - a_i)^2 subject to a_1 <= ... <= a_n.
    """
    n = y.shape[0]
    means = np.empty(n)
    weights = np.empty(n)
    counts = np.empty(n, dtype=np.intp)
    m = 0
    for i in range(n):
        cm = y[i]
        cw = w[i]
        cc = 1
        while m > 0 and means[m - 1] >= cm:
            cw_prev = weights[m - 1]
            cm = (means[m - 1] * cw_prev + cm * cw) / (cw_prev + cw)
            cw += cw_prev
            cc += counts[m - 1]
            m -= 1
        means[m] = cm
        weights[m] = cw
        counts[m] = cc
        m += 1
    return np.repeat(means[:m], counts[:m])


def _pava_fill_zero_weights(resp: np.ndarray, wts: np.ndarray) -> np.ndarray:
    """PAVA on the positive-weight points; zero-weight points inherit the
    fitted value of their left neighbor (0 before the first positive point)."""
    pos = wts > 0
    out = np.zeros(resp.shape[0])
    if not np.any(pos):
        return out
    fit = pava_kernel(resp[pos], wts[pos])
    out[pos] = fit
    if not np.all(pos):
        idx = np.where(pos, np.arange(out.size), -1)
        idx = np.maximum.accumulate(idx)
        out = np.where(idx >= 0, out[np.maximum(idx, 0)], 0.0)
    return out


def em_pava_run(
    lam_g: np.ndarray,
    grp_n: np.ndarray,
    cnt_le: np.ndarray,
    cnt_cens_le: np.ndarray,
    cens_lam: np.ndarray,
    cens_gidx: np.ndarray,
    cens_off: np.ndarray,
    f1_init: np.ndarray,
    f2_init: np.ndarray,
    tol: float,
    max_iter: int,
    eps: float,
):
    """Full EM loop with an isotonic-regression M-step.

    Parameters describe the sample aggregated by mixture group:
    ``lam_g[g]`` is the first mixture entry of group g, ``grp_n[g]`` its
    size, ``cnt_le[g, j]`` the number of members with time <= t_j and
    ``cnt_cens_le[g, j]`` the censored subset thereof.  ``cens_gidx`` holds,
    for the censored members sorted by time within group, the index of the
    last grid point <= their time (-1 if below the grid); ``cens_off`` are
    the group offsets into that array.  Returns the two fitted CDFs on the
    grid, the objective trace, the iteration count and a convergence flag.
    """
    m, h = cnt_le.shape
    f1 = np.array(f1_init, dtype=float)
    f2 = np.array(f2_init, dtype=float)
    lam = np.asarray(lam_g, dtype=float)[:, None]
    grp_n = np.asarray(grp_n, dtype=float)[:, None]
    trace = []
    converged = False
    n_iter = 0

    # prefix-sum lookup: for group g and grid point j, the sum of 1/rho_x
    # over censored members with time <= t_j.
    ncens = cens_gidx.shape[0]
    flat_idx = cens_off[:-1][:, None] + cnt_cens_le  # (m, h) index into csum

    for _ in range(max_iter):
        n_iter += 1
        if ncens:
            fx1 = np.where(cens_gidx >= 0, f1[np.maximum(cens_gidx, 0)], 0.0)
            fx2 = np.where(cens_gidx >= 0, f2[np.maximum(cens_gidx, 0)], 0.0)
            rho_x = cens_lam * (1.0 - fx1) + (1.0 - cens_lam) * (1.0 - fx2)
            inv = np.where(rho_x >= eps, 1.0 / np.maximum(rho_x, _TINY), 0.0)
            csum = np.concatenate([[0.0], np.cumsum(inv)])
            # restart the cumulative sum at each group boundary
            base = csum[cens_off[:-1]][:, None]
            prefix = csum[flat_idx] - base
        else:
            prefix = 0.0

        sig = lam * f1[None, :] + (1.0 - lam) * f2[None, :]
        rho = 1.0 - sig
        u = np.where(sig > 0, lam * f1[None, :] / np.maximum(sig, _TINY), lam)
        v = np.where(rho > 0, lam * (1.0 - f1[None, :]) / np.maximum(rho, _TINY), lam)

        s = cnt_le - rho * prefix  # per-group sum of (1 - w_ij)
        wsum = grp_n - s           # per-group sum of w_ij

        a = np.sum(u * s, axis=0)
        b = np.sum(v * wsum, axis=0)
        c = np.sum((1.0 - u) * s, axis=0)
        d = np.sum((1.0 - v) * wsum, axis=0)

        with np.errstate(divide="ignore"):
            loglam = np.where(lam > 0, np.log(np.maximum(lam, _TINY)), 0.0)
            log1m = np.where(lam < 1, np.log(np.maximum(1.0 - lam, _TINY)), 0.0)
        qlam = float(np.sum(loglam * (u * s + v * wsum))
                     + np.sum(log1m * ((1.0 - u) * s + (1.0 - v) * wsum)))

        f1n = _pava_fill_zero_weights(a / np.maximum(a + b, _TINY), a + b)
        f2n = _pava_fill_zero_weights(c / np.maximum(c + d, _TINY), c + d)
        np.clip(f1n, 0.0, 1.0, out=f1n)
        np.clip(f2n, 0.0, 1.0, out=f2n)

        q = qlam + float(
            np.sum(np.where(a > 0, a * np.log(np.maximum(f1n, _TINY)), 0.0))
            + np.sum(np.where(b > 0, b * np.log(np.maximum(1.0 - f1n, _TINY)), 0.0))
            + np.sum(np.where(c > 0, c * np.log(np.maximum(f2n, _TINY)), 0.0))
            + np.sum(np.where(d > 0, d * np.log(np.maximum(1.0 - f2n, _TINY)), 0.0))
        )
        trace.append(q)

        delta = max(np.max(np.abs(f1n - f1)), np.max(np.abs(f2n - f2)))
        f1, f2 = f1n, f2n
        if delta < tol:
            converged = True
            break

    return f1, f2, np.array(trace), n_iter, converged
