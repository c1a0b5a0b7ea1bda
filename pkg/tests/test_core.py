import io

import numpy as np
import pytest

from isomix.core import (
    CurveSet,
    TimeGrid,
    default_grid,
    eval_curve,
    even_grid,
    read_rows,
    sample_to_csv,
    validate_sample,
)
from isomix.errors import (
    BadStatus,
    EmptyInput,
    InconsistentK,
    MixNotSimplex,
    NegativeTime,
    NoEvents,
)


def make_sample(rows=None):
    rows = rows or [(1.0, 1, (0.6, 0.4)), (2.0, 0, (0.2, 0.8)),
                    (3.0, 1, (0.6, 0.4))]
    return validate_sample(rows)


class TestValidateSample:
    def test_basic_fields(self):
        s = make_sample()
        assert s.n == 3
        assert s.k == 2
        np.testing.assert_array_equal(s.times, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(s.status, [1, 0, 1])
        assert s.identifiable

    def test_support_order_and_counts(self):
        s = make_sample()
        assert s.support == (((0.6, 0.4), 2), ((0.2, 0.8), 1))

    def test_renormalizes_near_simplex_rows(self):
        s = validate_sample([(1.0, 1, (0.6 + 4e-10, 0.4)),
                             (2.0, 1, (0.3, 0.7))])
        np.testing.assert_allclose(s.mix.sum(axis=1), 1.0, rtol=0, atol=1e-15)

    def test_negative_time(self):
        with pytest.raises(NegativeTime):
            validate_sample([(-1.0, 1, (0.5, 0.5))])

    def test_nonfinite_time(self):
        with pytest.raises(NegativeTime):
            validate_sample([(float("nan"), 1, (0.5, 0.5))])

    def test_bad_status(self):
        with pytest.raises(BadStatus):
            validate_sample([(1.0, 2, (0.5, 0.5))])

    def test_mix_not_simplex_sum(self):
        with pytest.raises(MixNotSimplex):
            validate_sample([(1.0, 1, (0.5, 0.6))])

    def test_mix_entry_out_of_range(self):
        with pytest.raises(MixNotSimplex):
            validate_sample([(1.0, 1, (1.5, -0.5))])

    def test_inconsistent_k(self):
        with pytest.raises(InconsistentK):
            validate_sample([(1.0, 1, (0.5, 0.5)), (2.0, 1, (0.2, 0.3, 0.5))])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            validate_sample([])

    def test_identifiability_single_vector(self):
        s = validate_sample([(1.0, 1, (0.5, 0.5)), (2.0, 1, (0.5, 0.5))])
        assert not s.identifiable

    def test_fully_labeled(self):
        s = validate_sample([(1.0, 1, (1.0, 0.0)), (2.0, 1, (0.0, 1.0))])
        assert s.fully_labeled
        assert s.identifiable
        assert not make_sample().fully_labeled


class TestTimeGrid:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            TimeGrid(np.array([1.0, 1.0, 2.0]))

    def test_h(self):
        assert TimeGrid(np.array([1.0, 2.0])).h == 2


class TestCurveSet:
    def test_monotone_required(self):
        g = TimeGrid(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            CurveSet(g, np.array([[0.5, 0.5], [0.4, 0.6]]))

    def test_bounds_required(self):
        g = TimeGrid(np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            CurveSet(g, np.array([[0.5, 0.5], [0.6, 1.2]]))

    def test_unconstrained_exempt(self):
        g = TimeGrid(np.array([1.0, 2.0]))
        c = CurveSet(g, np.array([[0.5, 0.5], [0.4, 1.2]]), constrained=False)
        assert c.values[1, 1] == 1.2

    def test_tiny_violations_clipped(self):
        g = TimeGrid(np.array([1.0, 2.0]))
        c = CurveSet(g, np.array([[0.5, -1e-13], [0.5, 1.0 + 1e-13]]))
        assert c.values[0, 1] == 0.0
        assert c.values[1, 1] == 1.0


class TestGrids:
    def test_events_grid(self):
        g = default_grid(make_sample())
        np.testing.assert_array_equal(g.times, [1.0, 3.0])

    def test_no_events(self):
        s = validate_sample([(1.0, 0, (0.5, 0.5)), (2.0, 0, (0.4, 0.6))])
        with pytest.raises(NoEvents):
            default_grid(s)

    def test_even_grid_endpoints(self):
        t = even_grid(4, 0.0, 8.0)
        np.testing.assert_allclose(t, [2.0, 4.0, 6.0, 8.0])

    def test_even_mode(self):
        g = default_grid(make_sample(), "even", count=5, lo=0.0, hi=10.0)
        assert g.h == 5
        assert g.times[-1] == 10.0

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            default_grid(make_sample(), "quantiles")


class TestEvalCurve:
    def test_step_semantics(self):
        g = TimeGrid(np.array([1.0, 2.0]))
        c = CurveSet(g, np.array([[0.3, 0.1], [0.7, 0.5]]))
        # zero before the first knot, right-continuous at knots
        np.testing.assert_allclose(eval_curve(c, 0, [0.5, 1.0, 1.5, 2.0, 9.0]),
                                   [0.0, 0.3, 0.3, 0.7, 0.7])
        np.testing.assert_allclose(eval_curve(c, 1, [1.0, 2.5]), [0.1, 0.5])

    def test_nondecreasing(self):
        g = TimeGrid(np.array([1.0, 2.0, 3.0]))
        c = CurveSet(g, np.array([[0.1, 0.0], [0.5, 0.2], [0.9, 0.2]]))
        t = np.linspace(0, 4, 101)
        for k in (0, 1):
            assert np.all(np.diff(eval_curve(c, k, t)) >= 0)


class TestCsv:
    def test_round_trip(self):
        s = make_sample()
        text = sample_to_csv(s)
        rows = read_rows(io.StringIO(text))
        s2 = validate_sample(rows)
        np.testing.assert_allclose(s2.times, s.times, atol=1e-12)
        np.testing.assert_array_equal(s2.status, s.status)
        np.testing.assert_allclose(s2.mix, s.mix, atol=1e-12)

    def test_single_q_column_completed(self):
        rows = read_rows(io.StringIO("time,status,q1\n1.0,1,0.3\n"))
        s = validate_sample(rows)
        np.testing.assert_allclose(s.mix[0], [0.3, 0.7])

    def test_malformed_status(self):
        with pytest.raises(BadStatus):
            validate_sample(read_rows(io.StringIO("time,status,q1\n1.0,9,0.3\n")))
