# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``_reference``.

Same contracts as :mod:`isomix._kernels._reference`; the EM loop runs
entirely in C, which matters for permutation tests (10^5 EM fits).
"""

from libc.math cimport fabs, log

import numpy as np


cdef double _TINY = 1e-300


cdef Py_ssize_t _pava_core(double* y, double* w, Py_ssize_t n,
                           double* means, double* weights, Py_ssize_t* counts) nogil:
    """Stack-based PAVA; returns the number of pooled blocks."""
    cdef Py_ssize_t m = 0, i, cc
    cdef double cm, cw
    for i in range(n):
        cm = y[i]
        cw = w[i]
        cc = 1
        while m > 0 and means[m - 1] >= cm:
            cm = (means[m - 1] * weights[m - 1] + cm * cw) / (weights[m - 1] + cw)
            cw += weights[m - 1]
            cc += counts[m - 1]
            m -= 1
        means[m] = cm
        weights[m] = cw
        counts[m] = cc
        m += 1
    return m


def pava_kernel(double[::1] y, double[::1] w):
    """Weighted isotonic regression by pool-adjacent-violators."""
    cdef Py_ssize_t n = y.shape[0]
    out_arr = np.empty(n)
    means_arr = np.empty(n)
    weights_arr = np.empty(n)
    counts_arr = np.empty(n, dtype=np.intp)
    cdef double[::1] out = out_arr
    cdef double[::1] means = means_arr
    cdef double[::1] weights = weights_arr
    cdef Py_ssize_t[::1] counts = counts_arr
    cdef Py_ssize_t m, i, j, k = 0
    m = _pava_core(&y[0], &w[0], n, &means[0], &weights[0], &counts[0])
    for i in range(m):
        for j in range(counts[i]):
            out[k] = means[i]
            k += 1
    return out_arr


cdef void _pava_fill(double* resp, double* wts, Py_ssize_t h, double* out,
                     double* ybuf, double* wbuf, double* means, double* weights,
                     Py_ssize_t* counts) nogil:
    """PAVA on positive-weight points; zero-weight points inherit the left
    fitted value (0 before the first positive point)."""
    cdef Py_ssize_t j, npos = 0, m, bi, k
    cdef double last = 0.0
    for j in range(h):
        if wts[j] > 0:
            ybuf[npos] = resp[j]
            wbuf[npos] = wts[j]
            npos += 1
    if npos == 0:
        for j in range(h):
            out[j] = 0.0
        return
    m = _pava_core(ybuf, wbuf, npos, means, weights, counts)
    bi = 0
    k = counts[0]
    npos = 0
    for j in range(h):
        if wts[j] > 0:
            if npos >= k:
                bi += 1
                k += counts[bi]
            last = means[bi]
            if last < 0.0:
                last = 0.0
            elif last > 1.0:
                last = 1.0
            npos += 1
        out[j] = last


def em_pava_run(double[::1] lam_g,
                long[::1] grp_n,
                long[:, ::1] cnt_le,
                long[:, ::1] cnt_cens_le,
                double[::1] cens_lam,
                long[::1] cens_gidx,
                long[::1] cens_off,
                double[::1] f1_init,
                double[::1] f2_init,
                double tol,
                int max_iter,
                double eps):
    """Full EM loop; see the reference backend for the parameter layout."""
    cdef Py_ssize_t m = cnt_le.shape[0]
    cdef Py_ssize_t h = cnt_le.shape[1]
    cdef Py_ssize_t ncens = cens_gidx.shape[0]

    f1_arr = np.array(f1_init, dtype=np.float64)
    f2_arr = np.array(f2_init, dtype=np.float64)
    f1n_arr = np.empty(h)
    f2n_arr = np.empty(h)
    a_arr = np.empty(h)
    b_arr = np.empty(h)
    c_arr = np.empty(h)
    d_arr = np.empty(h)
    csum_arr = np.zeros(ncens + 1)
    trace_arr = np.empty(max_iter)
    resp_arr = np.empty(h)
    wts_arr = np.empty(h)
    ybuf_arr = np.empty(h)
    wbuf_arr = np.empty(h)
    means_arr = np.empty(h)
    weights_arr = np.empty(h)
    counts_arr = np.empty(h, dtype=np.intp)

    cdef double[::1] f1 = f1_arr
    cdef double[::1] f2 = f2_arr
    cdef double[::1] f1n = f1n_arr
    cdef double[::1] f2n = f2n_arr
    cdef double[::1] A = a_arr
    cdef double[::1] B = b_arr
    cdef double[::1] C = c_arr
    cdef double[::1] D = d_arr
    cdef double[::1] csum = csum_arr
    cdef double[::1] trace = trace_arr
    cdef double[::1] resp = resp_arr
    cdef double[::1] wts = wts_arr
    cdef double[::1] ybuf = ybuf_arr
    cdef double[::1] wbuf = wbuf_arr
    cdef double[::1] means = means_arr
    cdef double[::1] weights = weights_arr
    cdef Py_ssize_t[::1] counts = counts_arr

    cdef Py_ssize_t it, g, j, i, gi, n_iter = 0
    cdef bint converged = False
    cdef double lam, sig, rho, u, v, s, wsum, prefix, base
    cdef double f1x, f2x, rho_x, qlam, q, delta, dv, loglam, log1m, fv
    cdef long cle

    for it in range(max_iter):
        n_iter += 1
        # prefix sums of 1/rho(x_i) over censored members, restarted per group
        if ncens:
            for g in range(m):
                lam = lam_g[g]
                for i in range(cens_off[g], cens_off[g + 1]):
                    gi = cens_gidx[i]
                    if gi >= 0:
                        f1x = f1[gi]
                        f2x = f2[gi]
                    else:
                        f1x = 0.0
                        f2x = 0.0
                    rho_x = lam * (1.0 - f1x) + (1.0 - lam) * (1.0 - f2x)
                    if rho_x >= eps:
                        csum[i + 1] = csum[i] + 1.0 / rho_x
                    else:
                        csum[i + 1] = csum[i]

        for j in range(h):
            A[j] = 0.0
            B[j] = 0.0
            C[j] = 0.0
            D[j] = 0.0
        qlam = 0.0

        for g in range(m):
            lam = lam_g[g]
            loglam = log(lam) if lam > 0.0 else 0.0
            log1m = log(1.0 - lam) if lam < 1.0 else 0.0
            base = csum[cens_off[g]]
            for j in range(h):
                sig = lam * f1[j] + (1.0 - lam) * f2[j]
                rho = 1.0 - sig
                u = lam * f1[j] / sig if sig > 0.0 else lam
                v = lam * (1.0 - f1[j]) / rho if rho > 0.0 else lam
                cle = cnt_cens_le[g, j]
                prefix = csum[cens_off[g] + cle] - base
                s = cnt_le[g, j] - rho * prefix
                wsum = grp_n[g] - s
                A[j] += u * s
                B[j] += v * wsum
                C[j] += (1.0 - u) * s
                D[j] += (1.0 - v) * wsum
                if lam > 0.0:
                    qlam += loglam * (u * s + v * wsum)
                if lam < 1.0:
                    qlam += log1m * ((1.0 - u) * s + (1.0 - v) * wsum)

        for j in range(h):
            dv = A[j] + B[j]
            resp[j] = A[j] / dv if dv > 0.0 else 0.0
            wts[j] = dv
        _pava_fill(&resp[0], &wts[0], h, &f1n[0],
                   &ybuf[0], &wbuf[0], &means[0], &weights[0], &counts[0])
        for j in range(h):
            dv = C[j] + D[j]
            resp[j] = C[j] / dv if dv > 0.0 else 0.0
            wts[j] = dv
        _pava_fill(&resp[0], &wts[0], h, &f2n[0],
                   &ybuf[0], &wbuf[0], &means[0], &weights[0], &counts[0])

        q = qlam
        for j in range(h):
            fv = f1n[j]
            if A[j] > 0.0:
                q += A[j] * log(fv if fv > _TINY else _TINY)
            if B[j] > 0.0:
                q += B[j] * log((1.0 - fv) if (1.0 - fv) > _TINY else _TINY)
            fv = f2n[j]
            if C[j] > 0.0:
                q += C[j] * log(fv if fv > _TINY else _TINY)
            if D[j] > 0.0:
                q += D[j] * log((1.0 - fv) if (1.0 - fv) > _TINY else _TINY)
        trace[it] = q

        delta = 0.0
        for j in range(h):
            dv = fabs(f1n[j] - f1[j])
            if dv > delta:
                delta = dv
            dv = fabs(f2n[j] - f2[j])
            if dv > delta:
                delta = dv
            f1[j] = f1n[j]
            f2[j] = f2n[j]
        if delta < tol:
            converged = True
            break

    return f1_arr, f2_arr, trace_arr[:n_iter].copy(), n_iter, converged
