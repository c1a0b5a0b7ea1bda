"""Kaplan-Meier product-limit estimation with Greenwood variance.

Supports fractional case weights, which the type II NPMLE update needs.
Ties between an event and a censoring at the same time are resolved with
events first (the event is counted while the censored subject is still at
risk).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import TimeGrid
from .errors import EmptyInput


@dataclass(frozen=True)
class KmCurve:
    """Product-limit curve over the distinct uncensored times."""

    event_times: np.ndarray
    survival: np.ndarray
    greenwood_var: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def survival_at(self, t):
        """S(t), right-continuous; 1 before the first event."""
        return self._at(t, self.survival, 1.0)

    def variance_at(self, t):
        return self._at(t, self.greenwood_var, 0.0)

    def _at(self, t, levels, before):
        if self.event_times.size == 0:
            out = np.full(np.shape(t), before)
        else:
            idx = np.searchsorted(self.event_times, t, side="right") - 1
            out = np.where(idx >= 0, levels[np.maximum(idx, 0)], before)
        return float(out) if np.ndim(t) == 0 else out


def kaplan_meier(times, status, case_weights=None) -> KmCurve:
    """Product-limit estimator, aggregating tied event times.

    With all subjects censored the curve is flat S = 1 (with a warning).
    """
    times = np.asarray(times, dtype=float)
    status = np.asarray(status)
    if times.size == 0:
        raise EmptyInput("no observations")
    if case_weights is None:
        case_weights = np.ones_like(times)
    else:
        case_weights = np.asarray(case_weights, dtype=float)

    if not np.any((status == 1) & (case_weights > 0)):
        warnings.warn("all observations censored; survival is identically 1")
        empty = np.empty(0)
        return KmCurve(empty, empty.copy(), empty.copy(), empty.copy(), empty.copy())

    order = np.argsort(times, kind="stable")
    t = times[order]
    d = status[order]
    w = case_weights[order]

    uniq = np.unique(t[d == 1])
    # at risk: total weight with x >= e; events: weight of events at e
    total = w.sum()
    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    at_risk = total - cum_w[np.searchsorted(t, uniq, side="left")]
    ev_w = np.where(d == 1, w, 0.0)
    cum_ev = np.concatenate([[0.0], np.cumsum(ev_w)])
    lo = np.searchsorted(t, uniq, side="left")
    hi = np.searchsorted(t, uniq, side="right")
    events = cum_ev[hi] - cum_ev[lo]

    frac = np.where(at_risk > 0, events / np.where(at_risk > 0, at_risk, 1.0), 1.0)
    frac = np.minimum(frac, 1.0)
    surv = np.cumprod(1.0 - frac)

    denom = at_risk * (at_risk - events)
    gw_terms = np.where(denom > 0, events / np.where(denom > 0, denom, 1.0), 0.0)
    gw = surv**2 * np.cumsum(gw_terms)
    return KmCurve(uniq, surv, gw, at_risk, events)


def km_to_cdf(curve: KmCurve, grid: TimeGrid) -> np.ndarray:
    """F = 1 - S evaluated right-continuously at the grid points."""
    if curve.event_times.size == 0:
        return np.zeros(grid.h)
    return 1.0 - curve.survival_at(grid.times)


def km_cdf_at(curve: KmCurve, t):
    """F(t) = 1 - S(t) at arbitrary times."""
    return 1.0 - curve.survival_at(t)
