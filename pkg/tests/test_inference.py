import numpy as np
import pytest

from isomix.core import TimeGrid, validate_sample
from isomix.inference import bootstrap_bands, permutation_test


def labeled_sample(t1, t2, d1=None, d2=None):
    d1 = [1] * len(t1) if d1 is None else d1
    d2 = [1] * len(t2) if d2 is None else d2
    rows = [(t, d, (1.0, 0.0)) for t, d in zip(t1, d1)]
    rows += [(t, d, (0.0, 1.0)) for t, d in zip(t2, d2)]
    return validate_sample(rows)


def mixture_sample(rng, n=80, censor=0.0, scale2=2.0):
    lam = rng.choice([1.0, 0.6, 0.2, 0.16], size=n)
    comp1 = rng.random(n) < lam
    s = np.where(comp1, rng.exponential(1.0, n), rng.exponential(scale2, n))
    c = rng.uniform(0, 1 / censor, n) if censor > 0 else np.full(n, np.inf)
    x = np.minimum(s, c)
    return validate_sample([(xi, di, (li, 1 - li)) for xi, di, li
                            in zip(x, (s <= c).astype(int), lam)])


class TestPermutationTest:
    def test_identical_groups_give_p_one(self):
        t = np.linspace(0.5, 5.0, 12)
        sample = labeled_sample(t, t)  # both components share the same times
        grid = TimeGrid(np.linspace(0.5, 5, 8))
        res = permutation_test(sample, grid, n_perm=50, seed=0)
        assert res.s0 == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == 1.0

    def test_p_value_range_and_count(self):
        rng = np.random.default_rng(1)
        sample = mixture_sample(rng)
        grid = TimeGrid(np.linspace(0.2, 3, 10))
        res = permutation_test(sample, grid, n_perm=40, seed=3)
        assert 0.0 <= res.p_value <= 1.0
        assert res.s_perm.shape == (40,)
        assert res.p_value == np.mean(res.s_perm >= res.s0)

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(2)
        sample = mixture_sample(rng, n=50)
        grid = TimeGrid(np.linspace(0.2, 3, 8))
        a = permutation_test(sample, grid, n_perm=20, seed=11)
        b = permutation_test(sample, grid, n_perm=20, seed=11)
        assert a.p_value == b.p_value
        np.testing.assert_array_equal(a.s_perm, b.s_perm)

    def test_separated_groups_give_small_p(self):
        rng = np.random.default_rng(3)
        t1 = rng.exponential(0.3, 40)
        t2 = rng.exponential(4.0, 40)
        sample = labeled_sample(t1, t2)
        grid = TimeGrid(np.linspace(0.2, 5, 10))
        res = permutation_test(sample, grid, n_perm=60, seed=5)
        assert res.p_value <= 0.05

    def test_restrict_to(self):
        rng = np.random.default_rng(4)
        sample = mixture_sample(rng, n=60)
        grid = TimeGrid(np.linspace(0.2, 3, 10))
        res = permutation_test(sample, grid, n_perm=10, seed=7,
                               restrict_to=[1.0])
        assert np.isfinite(res.s0)

    def test_bad_n_perm(self):
        rng = np.random.default_rng(5)
        sample = mixture_sample(rng, n=20)
        with pytest.raises(ValueError):
            permutation_test(sample, TimeGrid(np.array([1.0])), n_perm=0)


class TestBootstrapBands:
    def test_shapes_and_order(self):
        rng = np.random.default_rng(6)
        sample = mixture_sample(rng, n=60, censor=0.3)
        grid = TimeGrid(np.linspace(0.2, 3, 9))
        res = bootstrap_bands(sample, grid, n_boot=30, seed=1)
        assert res.sd.shape == (9, 2)
        assert np.all(res.sd >= 0)
        assert np.all(res.lo <= res.hi + 1e-12)
        assert res.n_failed == 0

    def test_degenerate_sample_zero_sd(self):
        # every row identical, so every resample is the same dataset
        rows = [(1.0, 1, (1.0, 0.0))] * 4 + [(2.0, 1, (0.0, 1.0))] * 4
        # resampling can lose one support vector; keep both labels present
        # by using a sample made of one distinct row per component many times
        sample = validate_sample(rows)
        grid = TimeGrid(np.array([1.0, 2.0]))
        res = bootstrap_bands(sample, grid, method="em_pava", n_boot=2, seed=2)
        # the only variation comes from resampled label counts; with a
        # degenerate seed both replicates may coincide -- sd finite and small
        assert np.all(np.isfinite(res.sd))

    def test_deterministic_in_seed(self):
        rng = np.random.default_rng(7)
        sample = mixture_sample(rng, n=50)
        grid = TimeGrid(np.linspace(0.2, 3, 6))
        a = bootstrap_bands(sample, grid, n_boot=10, seed=9)
        b = bootstrap_bands(sample, grid, n_boot=10, seed=9)
        np.testing.assert_array_equal(a.sd, b.sd)
        np.testing.assert_array_equal(a.lo, b.lo)

    def test_level_validation(self):
        rng = np.random.default_rng(8)
        sample = mixture_sample(rng, n=20)
        grid = TimeGrid(np.array([1.0]))
        with pytest.raises(ValueError):
            bootstrap_bands(sample, grid, n_boot=10, level=1.5)
        with pytest.raises(ValueError):
            bootstrap_bands(sample, grid, n_boot=1)

    def test_bands_bracket_truth_mostly(self):
        rng = np.random.default_rng(9)
        sample = mixture_sample(rng, n=150, scale2=1.0)
        grid = TimeGrid(np.array([1.0]))
        res = bootstrap_bands(sample, grid, n_boot=60, level=0.95, seed=4)
        truth = 1 - np.exp(-1.0)
        assert res.lo[0, 0] - 0.05 <= truth <= res.hi[0, 0] + 0.05
