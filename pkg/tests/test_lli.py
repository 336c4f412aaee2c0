import logging

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from manifold_interp import lli
from manifold_interp.errors import InsufficientHistory, NonFiniteInput, SingularSystem
from manifold_interp.lli import LliConfig, Neighborhood

TINY = LliConfig(k=3, sigma=1e-12)
# At sigma=1e-12 the regularized Gram matrix has condition number ~1e12, so
# weights from any double-precision factorization carry ~1e-5 error even
# though reconstruction residuals stay near 1e-11.
ILL_TOL = 1e-4

# Frozen from oracles.kkt_weights(..., exact=True) / lli_extrapolate(..., exact=True).
GOLDEN_T2_EXTRAP = 18.76923076895414
GOLDEN_QUAD_GAP10 = 98.48770656992455
GOLDEN_CIRCLE_NEXT = (95.23010691313705, 29.51665659821593)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def window(k):
    return st.lists(finite, min_size=k, max_size=k)


class TestConfig:
    def test_defaults(self):
        cfg = LliConfig()
        assert (cfg.k, cfg.sigma) == (5, 1e-3)

    @pytest.mark.parametrize("k", [1, 33])
    def test_k_bounds(self, k):
        with pytest.raises(ValueError):
            LliConfig(k=k)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            LliConfig(sigma=-1.0)

    def test_large_k_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            LliConfig(k=17)
        assert any("17" in rec.getMessage() for rec in caplog.records)


class TestSolveWeights:
    def test_uniform_fallback(self):
        w = lli.solve_weights([5, 5, 5], 5, LliConfig(3, 1e-8))
        np.testing.assert_allclose(w, [1 / 3] * 3, atol=1e-15)

    def test_line_example(self):
        exact = oracles.kkt_weights([0, 1, 2], 3, 1e-12, exact=True)
        np.testing.assert_allclose(exact, [-2 / 3, 1 / 3, 4 / 3], atol=1e-10)
        w = lli.solve_weights([0, 1, 2], 3, TINY)
        np.testing.assert_allclose(w, exact, atol=ILL_TOL)
        assert abs(lli.reconstruct([0, 1, 2], w) - 3) < 1e-9

    def test_parabola_example(self):
        exact = oracles.kkt_weights([0, 1, 4], 9, 1e-12, exact=True)
        np.testing.assert_allclose(exact, [-14 / 13, -3 / 13, 30 / 13], atol=1e-9)
        w = lli.solve_weights([0, 1, 4], 9, TINY)
        np.testing.assert_allclose(w, exact, atol=ILL_TOL)
        assert abs(lli.reconstruct([0, 1, 4], w) - 9) < 1e-9

    def test_matches_kkt_at_default_sigma(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            k = int(rng.integers(2, 11))
            vals, tgt = rng.uniform(-100, 100, k), rng.uniform(-100, 100)
            w = lli.solve_weights(vals, tgt, LliConfig(k, 1e-3))
            np.testing.assert_allclose(w, oracles.kkt_weights(list(vals), tgt, 1e-3), atol=1e-9, rtol=0)

    def test_nonfinite(self):
        with pytest.raises(NonFiniteInput):
            lli.solve_weights([0, np.nan, 1], 2, TINY)
        with pytest.raises(NonFiniteInput):
            lli.solve_weights([0, 1, 2], np.inf, TINY)

    def test_zero_sigma_singular(self):
        with pytest.raises(SingularSystem):
            lli.solve_weights([0, 1, 2], 3, LliConfig(3, 0.0))

    def test_length_must_match_k(self):
        with pytest.raises(ValueError):
            lli.solve_weights([0, 1], 3, TINY)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        vals = rng.uniform(-50, 50, (40, 5))
        tgt = rng.uniform(-50, 50, 40)
        batch = lli.solve_weights_batch(tgt[:, None] - vals, 1e-3)
        single = np.array([lli.solve_weights(v, t, LliConfig(5, 1e-3)) for v, t in zip(vals, tgt)])
        np.testing.assert_allclose(batch, single, atol=1e-12)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 10).flatmap(lambda k: st.tuples(window(k), finite)))
    def test_sum_to_one(self, case):
        vals, tgt = case
        w = lli.solve_weights(vals, tgt, LliConfig(len(vals), 1e-3))
        assert abs(w.sum() - 1) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(2, 10).flatmap(lambda k: st.tuples(window(k), finite)),
        st.floats(0.01, 10).flatmap(lambda a: st.sampled_from([a, -a])),
        st.floats(-100, 100),
    )
    def test_affine_invariance(self, case, a, b):
        vals, tgt = case
        # The differences must survive the shift by b in double precision.
        pts = np.append(vals, tgt)
        assume(np.ptp(pts) > 1e-6 * (abs(b) + np.abs(pts).max()))
        cfg = LliConfig(len(vals), 1e-3)
        w0 = lli.solve_weights(vals, tgt, cfg)
        w1 = lli.solve_weights([a * v + b for v in vals], a * tgt + b, cfg)
        np.testing.assert_allclose(w1, w0, atol=1e-9 * max(1.0, np.abs(w0).max()))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 8).flatmap(lambda k: st.tuples(window(k), finite)))
    def test_small_sigma_residual(self, case):
        vals, tgt = case
        x = tgt - np.asarray(vals)
        # The regularization bias grows like sigma*|X|/sin^2(angle(X, 1)), so
        # the bound is only meaningful away from X parallel to 1.
        if not np.any(x):
            return
        u = x / np.abs(x).max()
        if 1 - u.sum() ** 2 / (u.size * u @ u) < 1e-4:
            return
        w = lli.solve_weights(vals, tgt, LliConfig(len(vals), 1e-12))
        assert abs(tgt - lli.reconstruct(vals, w)) <= 1e-6 * abs(tgt) + 1e-9 + 1e-6 * np.abs(x).max()

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 8).flatmap(lambda k: st.tuples(window(k), finite)))
    def test_small_sigma_limit_weights(self, case):
        vals, tgt = case
        x = tgt - np.asarray(vals)
        if np.ptp(x) < 0.5 or np.abs(x).max() < 1:
            return
        lim = oracles.limit_weights(list(vals), tgt)
        exact = oracles.kkt_weights(list(vals), tgt, 1e-12, exact=True)
        np.testing.assert_allclose(exact, lim, atol=1e-6 * max(1.0, max(map(abs, lim))))

    @given(st.integers(2, 10).flatmap(lambda k: st.tuples(window(k), finite)))
    def test_deterministic(self, case):
        vals, tgt = case
        cfg = LliConfig(len(vals), 1e-3)
        assert lli.solve_weights(vals, tgt, cfg).tobytes() == lli.solve_weights(vals, tgt, cfg).tobytes()


class TestReconstruct:
    def test_mean(self):
        assert lli.reconstruct([1, 2, 3], [1 / 3] * 3) == pytest.approx(2)

    def test_dot(self):
        assert lli.reconstruct([1, 2, 3], [-2 / 3, 1 / 3, 4 / 3]) == pytest.approx(4)

    def test_constant(self):
        assert lli.reconstruct([7, 7, 7], [0.2, -1.3, 2.1]) == pytest.approx(7)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            lli.reconstruct([1, 2], [1.0])


class TestExtrapolate:
    def test_line(self):
        assert lli.extrapolate_next([0, 1, 2, 3], TINY) == pytest.approx(4, abs=1e-6)

    def test_constant(self):
        assert lli.extrapolate_next([3.5] * 4, TINY) == pytest.approx(3.5, abs=1e-14)

    def test_t_squared_golden(self):
        assert oracles.lli_extrapolate([0, 1, 4, 9], 3, 1e-12, exact=True) == pytest.approx(GOLDEN_T2_EXTRAP, abs=1e-12)
        assert lli.extrapolate_next([0, 1, 4, 9], TINY) == pytest.approx(GOLDEN_T2_EXTRAP, abs=ILL_TOL)

    def test_insufficient(self):
        with pytest.raises(InsufficientHistory):
            lli.extrapolate_next([0, 1, 2], TINY)

    def test_uses_only_last_k_plus_one(self):
        assert lli.extrapolate_next([99, -4, 0, 1, 2, 3], TINY) == pytest.approx(4, abs=1e-6)


class TestPoint2d:
    def test_two_lines(self):
        x, y = lli.interpolate_point_2d([0, 1, 2, 3], [0, 2, 4, 6], TINY)
        assert (x, y) == (pytest.approx(4, abs=1e-6), pytest.approx(8, abs=1e-6))

    def test_axis_independence(self):
        x, y = lli.interpolate_point_2d([5] * 4, [0, 1, 2, 3], TINY)
        assert (x, y) == (5, pytest.approx(4, abs=1e-6))

    def test_circle_golden(self):
        ang = np.arange(6) * 0.05
        cx, cy = 100 * np.cos(ang), 100 * np.sin(ang)
        cfg = LliConfig(5, 1e-3)
        ox = oracles.lli_extrapolate(list(cx), 5, 1e-3, exact=True)
        oy = oracles.lli_extrapolate(list(cy), 5, 1e-3, exact=True)
        assert (ox, oy) == (pytest.approx(GOLDEN_CIRCLE_NEXT[0], abs=1e-9), pytest.approx(GOLDEN_CIRCLE_NEXT[1], abs=1e-9))
        x, y = lli.interpolate_point_2d(cx, cy, cfg)
        np.testing.assert_allclose([x, y], GOLDEN_CIRCLE_NEXT, atol=1e-8)
        # Within a centimetre of the true continuation on a 1 m circle.
        assert np.hypot(x - 100 * np.cos(0.3), y - 100 * np.sin(0.3)) < 1.0


class TestInRange:
    @pytest.mark.parametrize("k", [2, 3, 5, 8])
    @pytest.mark.parametrize("gap", [10, 25, 40])
    def test_line_exact(self, k, gap):
        before = np.arange(0, gap, dtype=float)
        after = np.arange(gap + 1, 60, dtype=float)
        got = lli.interpolate_in_range(Neighborhood(before, after, gap), LliConfig(k, 1e-12))
        assert got == pytest.approx(gap, abs=1e-6)

    def test_constant(self):
        got = lli.interpolate_in_range(Neighborhood(np.full(8, 2.5), np.full(8, 2.5)), LliConfig())
        assert got == 2.5

    def test_quadratic_golden(self):
        before = np.arange(0, 10, dtype=float) ** 2
        after = np.arange(11, 20, dtype=float) ** 2
        got = lli.interpolate_in_range(Neighborhood(before, after, 10), LliConfig(5, 1e-12))
        assert got == pytest.approx(GOLDEN_QUAD_GAP10, abs=ILL_TOL)
        assert abs(got - 100) < 2

    def test_quadratic_oracle_derivation(self):
        # Before-side stencil for k=5: apply offsets -3,-2,-1,+1,+2; fit target at -3.
        seq = [j * j for j in range(30) if j != 10]

        def at(o):
            return seq[10 + o] if o < 0 else seq[10 + o - 1]

        apply = [-3, -2, -1, 1, 2]
        refs = [-3 + o for o in apply]
        w = oracles.kkt_weights([at(o) for o in refs], at(-3), 1e-12, exact=True)
        assert sum(wi * at(o) for wi, o in zip(w, apply)) == pytest.approx(GOLDEN_QUAD_GAP10, abs=1e-9)

    def test_after_side_fallback(self):
        # Only 3 samples before the gap: the fit moves to the far side.
        before = np.arange(7, 10, dtype=float)
        after = np.arange(11, 30, dtype=float)
        assert lli.interpolate_in_range(Neighborhood(before, after, 10), LliConfig(5, 1e-12)) == pytest.approx(10, abs=1e-6)

    def test_insufficient(self):
        with pytest.raises(InsufficientHistory):
            lli.interpolate_in_range(Neighborhood(np.arange(2.0), np.arange(3.0, 5.0)), LliConfig(5))

    @pytest.mark.parametrize("k,want", [(2, (1, 1)), (3, (2, 1)), (4, (2, 2)), (5, (3, 2)), (10, (5, 5))])
    def test_split_counts(self, k, want):
        assert lli.split_counts(k) == want

    def test_k2_is_symmetric(self):
        # One reference on each side: a line through the neighbours.
        before, after = np.array([0.0, 1.0, 2.0, 3.0]), np.array([5.0, 6.0])
        assert lli.interpolate_in_range(Neighborhood(before, after), LliConfig(2, 1e-12)) == pytest.approx(4, abs=1e-6)

    @pytest.mark.parametrize("k", range(2, 33))
    def test_stencils_never_touch_gap(self, k):
        for s in lli._inrange_stencils(k):
            assert 0 not in s.apply and 0 not in s.refs and s.target != 0
            assert len(s.apply) == len(s.refs) == k
            assert s.target not in s.refs


class TestSeries:
    def test_line_isolated_and_trailing_gaps(self):
        t = np.arange(100)
        lost = np.array([8, 20, 22, 50, 97, 98, 99])
        keep = ~np.isin(t, lost)
        got = lli.interpolate_series(t[keep], 3.0 * t[keep] - 7, lost, LliConfig(5, 1e-12))
        # Isolated gaps and the trailing run sit on uniformly spaced known samples.
        exact = np.isin(lost, [8, 50, 97, 98, 99])
        np.testing.assert_allclose(got[exact], 3.0 * lost[exact] - 7, atol=1e-6)

    def test_run_filled_in_rounds(self):
        t = np.arange(60)
        lost = np.array([30, 31, 32])
        keep = ~np.isin(t, lost)
        v = np.sin(t / 7.0)
        got = lli.interpolate_series(t[keep], v[keep], lost, LliConfig(5, 1e-3))
        # Round one fills 30 from the known sequence, later rounds reuse it.
        known = v[keep]
        pos = 30
        first = lli._fill_round(known, np.array([pos]), LliConfig(5, 1e-3))[0]
        assert got[0] == first
        assert np.all(np.isfinite(got))
        assert np.all(np.abs(got - v[lost]) < 0.2)

    def test_knot_query_returns_value(self):
        t = np.arange(20)
        got = lli.interpolate_series(t, np.sin(t), [4, 9], LliConfig())
        np.testing.assert_array_equal(got, np.sin([4, 9]))

    def test_query_before_first_sample(self):
        with pytest.raises(InsufficientHistory):
            lli.interpolate_series(np.arange(5, 30), np.arange(25.0), [2], LliConfig())

    def test_constant_series(self):
        t = np.arange(40)
        keep = t % 3 != 1
        keep[:8] = True
        got = lli.interpolate_series(t[keep], np.full(keep.sum(), 4.0), t[~keep], LliConfig())
        np.testing.assert_allclose(got, 4.0)
