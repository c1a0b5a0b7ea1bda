import warnings

import numpy as np
import pytest

from isomix.core import TimeGrid
from isomix.survival import kaplan_meier, km_to_cdf


class TestKaplanMeier:
    def test_hand_computed_values(self):
        # events at 1 and 3, censoring at 2:
        # S(1) = 2/3, S(2) = 2/3, S(3) = 2/3 * (1 - 1/1) = 0
        km = kaplan_meier(np.array([1.0, 2.0, 3.0]), np.array([1, 0, 1]))
        np.testing.assert_array_equal(km.event_times, [1.0, 3.0])
        np.testing.assert_allclose(km.survival, [2 / 3, 0.0])
        np.testing.assert_array_equal(km.at_risk, [3, 1])
        np.testing.assert_array_equal(km.events, [1, 1])

    def test_no_censoring_is_ecdf(self):
        rng = np.random.default_rng(0)
        x = rng.exponential(size=40)
        km = kaplan_meier(x, np.ones(40, dtype=int))
        s = km.survival_at(x)
        ecdf = np.searchsorted(np.sort(x), x, side="right") / 40
        np.testing.assert_allclose(1.0 - s, ecdf, atol=1e-12)

    def test_ties_event_before_censoring(self):
        # tie at t=2: the event is counted with the censored subject at risk
        km = kaplan_meier(np.array([2.0, 2.0]), np.array([1, 0]))
        np.testing.assert_allclose(km.survival, [0.5])
        np.testing.assert_array_equal(km.at_risk, [2])

    def test_survival_before_first_event(self):
        km = kaplan_meier(np.array([1.0, 2.0]), np.array([1, 1]))
        assert km.survival_at(0.5) == 1.0
        assert km.variance_at(0.5) == 0.0

    def test_all_censored_flat(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            km = kaplan_meier(np.array([1.0, 2.0]), np.array([0, 0]))
        assert any("censor" in str(w.message).lower() for w in caught)
        assert km.survival_at(10.0) == 1.0

    def test_greenwood_hand_value(self):
        # S(1) = 3/4; var = S^2 * d/(n(n-d)) = (3/4)^2 * 1/(4*3)
        km = kaplan_meier(np.array([1.0, 2.0, 3.0, 4.0]),
                          np.array([1, 0, 0, 0]))
        np.testing.assert_allclose(km.greenwood_var, [(3 / 4) ** 2 / 12])

    def test_case_weights_match_replication(self):
        t = np.array([1.0, 2.0, 3.0])
        d = np.array([1, 0, 1])
        w = np.array([2.0, 1.0, 3.0])
        km_w = kaplan_meier(t, d, case_weights=w)
        reps = np.repeat(np.arange(3), [2, 1, 3])
        km_r = kaplan_meier(t[reps], d[reps])
        np.testing.assert_allclose(km_w.survival, km_r.survival, atol=1e-12)


class TestKmToCdf:
    def test_zero_before_first_event(self):
        km = kaplan_meier(np.array([2.0, 3.0]), np.array([1, 1]))
        grid = TimeGrid(np.array([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_allclose(km_to_cdf(km, grid), [0.0, 0.5, 1.0, 1.0])

    def test_monotone(self):
        rng = np.random.default_rng(1)
        t = rng.exponential(size=50)
        d = rng.integers(0, 2, size=50)
        d[0] = 1
        km = kaplan_meier(t, d)
        grid = TimeGrid(np.linspace(0.01, 5, 40))
        assert np.all(np.diff(km_to_cdf(km, grid)) >= -1e-12)
