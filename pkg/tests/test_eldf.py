import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfmm.eldf import (
    ASK,
    BID,
    COMBINED,
    AssetCurves,
    CurvePoint,
    Eldf,
    eval_eldf,
    fit_eldf,
    integrate_eldf,
    parse_snapshot_lines,
    snapshot_to_curves,
    solve_volume_for_value,
)
from dfmm.errors import (
    NoFeasibleRoot,
    NonMonotoneVolumes,
    NonPositiveDensity,
    OutOfDomain,
    ParseError,
    ReversedInterval,
    TooFewPoints,
)
from oracles import grid_solve_volume, newton_quadratic, random_positive_quadratic


def quad_points(c2, c1, c0, vols):
    return [CurvePoint(v, (c2 * v + c1) * v + c0) for v in vols]


class TestFit:
    def test_constant_data(self):
        curve = fit_eldf([CurvePoint(v, 1.0) for v in (0.0, 1.0, 2.0)])
        assert curve.c2 == pytest.approx(0.0, abs=1e-12)
        assert curve.c1 == pytest.approx(0.0, abs=1e-12)
        assert curve.c0 == pytest.approx(1.0, abs=1e-12)
        assert curve.fit_domain == (0.0, 2.0)

    def test_exact_quadratic_matches_newton_oracle(self):
        pts = quad_points(2.0, 3.0, 1.0, (0.0, 1.0, 2.0))
        curve = fit_eldf(pts)
        c2, c1, c0 = newton_quadratic([(p.volume, p.price) for p in pts])
        assert curve.c2 == pytest.approx(c2, abs=1e-8)
        assert curve.c1 == pytest.approx(c1, abs=1e-8)
        assert curve.c0 == pytest.approx(c0, abs=1e-8)

    def test_fit_exactness_random_quadratics(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            c2, c1, c0, v_hi = random_positive_quadratic(rng)
            vols = np.linspace(0.0, v_hi, 9)
            curve = fit_eldf(quad_points(c2, c1, c0, vols))
            scale = max(1.0, abs(c2), abs(c1), abs(c0))
            assert abs(curve.c2 - c2) <= 1e-8 * scale
            assert abs(curve.c1 - c1) <= 1e-8 * scale
            assert abs(curve.c0 - c0) <= 1e-8 * scale

    def test_perturbed_fit_beats_grid_around_truth(self):
        # alternating +/-0.01 perturbation of p = v + 1 at 7 points
        vols = [float(v) for v in range(7)]
        prices = [v + 1.0 + (0.01 if i % 2 == 0 else -0.01) for i, v in enumerate(vols)]
        pts = [CurvePoint(v, p) for v, p in zip(vols, prices)]
        curve = fit_eldf(pts)

        def sse(c2, c1, c0):
            return sum(((c2 * v + c1) * v + c0 - p) ** 2 for v, p in zip(vols, prices))

        best_fit = sse(curve.c2, curve.c1, curve.c0)
        offsets = [-0.10, -0.05, 0.0, 0.05, 0.10]
        for d2 in offsets:
            for d1 in offsets:
                for d0 in offsets:
                    assert best_fit <= sse(0.0 + d2, 1.0 + d1, 1.0 + d0) + 1e-12

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            fit_eldf([CurvePoint(0, 1), CurvePoint(1, 1)])

    def test_non_monotone_volumes(self):
        pts = [CurvePoint(0, 1), CurvePoint(2, 1), CurvePoint(1, 1)]
        with pytest.raises(NonMonotoneVolumes):
            fit_eldf(pts)

    def test_negative_dip_rejected(self):
        # positive V-shaped data whose least-squares parabola dips below zero
        prices = (5.0, 0.1, 0.05, 0.1, 5.0)
        pts = [CurvePoint(float(v), p) for v, p in zip(range(5), prices)]
        with pytest.raises(NonPositiveDensity):
            fit_eldf(pts)

    def test_degree_fixed_at_two(self):
        pts = quad_points(0.0, 0.0, 1.0, (0.0, 1.0, 2.0, 3.0))
        with pytest.raises(ValueError):
            fit_eldf(pts, degree=3)


class TestEval:
    def test_constant(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        assert eval_eldf(curve, 7.0) == 1.0

    def test_quadratic(self):
        curve = Eldf(2.0, 3.0, 1.0, v_lo=0.0, v_hi=5.0)
        assert eval_eldf(curve, 1.0) == pytest.approx(6.0)

    def test_pure_square(self):
        curve = Eldf(1.0, 0.0, 0.0, v_lo=1.0, v_hi=5.0)
        assert eval_eldf(curve, 3.0) == pytest.approx(9.0)

    def test_out_of_domain_errors_by_default(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        with pytest.raises(OutOfDomain):
            eval_eldf(curve, 11.0)

    def test_clamped_extrapolation(self):
        curve = Eldf(0.0, 1.0, 1.0, v_lo=0.0, v_hi=10.0, extrapolation="clamp")
        assert eval_eldf(curve, 15.0) == pytest.approx(11.0)


class TestIntegrate:
    def test_unit_density(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        assert integrate_eldf(curve, 0.0, 5.0) == pytest.approx(5.0)

    def test_antiderivative(self):
        curve = Eldf(3.0, 2.0, 1.0, v_lo=0.0, v_hi=5.0)
        assert integrate_eldf(curve, 0.0, 1.0) == pytest.approx(3.0)

    def test_linear_density(self):
        curve = Eldf(0.0, 2.0, 0.0, v_lo=0.0, v_hi=5.0)
        assert integrate_eldf(curve, 1.0, 2.0) == pytest.approx(3.0)

    def test_reversed_interval(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        with pytest.raises(ReversedInterval):
            integrate_eldf(curve, 5.0, 4.0)

    def test_additivity_random(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            c2, c1, c0, v_hi = random_positive_quadratic(rng)
            curve = Eldf(c2, c1, c0, v_lo=0.0, v_hi=v_hi)
            a, b, c = sorted(rng.uniform(0.0, v_hi, size=3))
            whole = integrate_eldf(curve, a, c)
            split = integrate_eldf(curve, a, b) + integrate_eldf(curve, b, c)
            assert abs(whole - split) <= 1e-9 * max(1.0, abs(whole))

    def test_clamp_adds_boundary_tail(self):
        curve = Eldf(0.0, 0.0, 2.0, v_lo=0.0, v_hi=10.0, extrapolation="clamp")
        assert integrate_eldf(curve, 0.0, 12.0) == pytest.approx(24.0)


class TestSolve:
    def test_unit_density(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        assert solve_volume_for_value(curve, 0.0, 5.0) == pytest.approx(5.0)

    def test_linear_density(self):
        curve = Eldf(0.0, 2.0, 0.0, v_lo=0.0, v_hi=5.0)
        assert solve_volume_for_value(curve, 0.0, 4.0) == pytest.approx(2.0)

    def test_pure_square(self):
        curve = Eldf(3.0, 0.0, 0.0, v_lo=1.0, v_hi=5.0)
        assert solve_volume_for_value(curve, 1.0, 7.0) == pytest.approx(2.0)

    def test_infeasible_target(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        with pytest.raises(NoFeasibleRoot):
            solve_volume_for_value(curve, 0.0, 11.0)

    def test_negative_target(self):
        curve = Eldf(0.0, 0.0, 1.0, v_lo=0.0, v_hi=10.0)
        with pytest.raises(NoFeasibleRoot):
            solve_volume_for_value(curve, 0.0, -1.0)

    def test_clamp_sources_beyond_domain(self):
        curve = Eldf(0.0, 0.0, 2.0, v_lo=0.0, v_hi=10.0, extrapolation="clamp")
        assert solve_volume_for_value(curve, 0.0, 24.0) == pytest.approx(12.0)

    def test_round_trip_random(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            c2, c1, c0, v_hi = random_positive_quadratic(rng)
            curve = Eldf(c2, c1, c0, v_lo=0.0, v_hi=v_hi)
            v1 = float(rng.uniform(0.0, 0.5 * v_hi))
            cap = integrate_eldf(curve, v1, v_hi)
            target = float(rng.uniform(0.0, cap))
            v2 = solve_volume_for_value(curve, v1, target)
            got = integrate_eldf(curve, v1, v2)
            assert abs(got - target) <= 1e-9 * max(1.0, target)

    def test_monotone_inversion(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            c2, c1, c0, v_hi = random_positive_quadratic(rng)
            curve = Eldf(c2, c1, c0, v_lo=0.0, v_hi=v_hi)
            cap = integrate_eldf(curve, 0.0, v_hi)
            m1, m2 = sorted(rng.uniform(0.0, cap, size=2))
            assert solve_volume_for_value(curve, 0.0, m1) <= solve_volume_for_value(
                curve, 0.0, m2
            ) + 1e-12

    def test_grid_oracle_agreement(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            c2, c1, c0, v_hi = random_positive_quadratic(rng)
            curve = Eldf(c2, c1, c0, v_lo=0.0, v_hi=v_hi)
            v1 = float(rng.uniform(0.0, 0.3 * v_hi))
            cap = integrate_eldf(curve, v1, v_hi)
            target = float(rng.uniform(0.05, 0.95)) * cap
            fast = solve_volume_for_value(curve, v1, target)
            slow = grid_solve_volume(c2, c1, c0, v1, v_hi, target, steps=10**5)
            assert abs(fast - slow) <= 1e-5 * max(1.0, v_hi)


class TestSnapshot:
    def test_combined_constant(self):
        pts = [CurvePoint(v, 1.0) for v in (0.0, 1.0, 2.0)]
        curve = snapshot_to_curves(pts, COMBINED)
        assert curve.side == COMBINED
        assert curve.c0 == pytest.approx(1.0, abs=1e-12)
        assert curve.c2 == pytest.approx(0.0, abs=1e-12)

    def test_split_fits_each_side(self):
        mid = 100.0
        # bid side below mid: density falls away from the best bid
        bid_side = [CurvePoint(v, 99.0 - 0.5 * (3.0 - v)) for v in (0.0, 1.5, 3.0)]
        ask_side = [CurvePoint(v, 101.0 + 0.5 * (v - 4.0)) for v in (4.0, 5.5, 7.0)]
        bid, ask = snapshot_to_curves(bid_side + ask_side, "split", mid_price=mid)
        assert bid.side == BID and ask.side == ASK
        # re-based depths start at zero and reproduce the side data
        assert bid.v_lo == 0.0 and ask.v_lo == 0.0
        assert eval_eldf(bid, 0.0) == pytest.approx(99.0)
        assert eval_eldf(bid, 3.0) == pytest.approx(97.5)
        assert eval_eldf(ask, 0.0) == pytest.approx(101.0)
        assert eval_eldf(ask, 3.0) == pytest.approx(102.5)

    def test_split_empty_side(self):
        pts = [CurvePoint(v, 90.0 + v) for v in (0.0, 1.0, 2.0)]
        with pytest.raises(TooFewPoints):
            snapshot_to_curves(pts, "split", mid_price=200.0)

    def test_empty_snapshot(self):
        with pytest.raises(TooFewPoints):
            snapshot_to_curves([], COMBINED)

    def test_parse_snapshot_lines(self):
        lines = [
            "# venue export",
            "0, nyse, 0.0, 99.5",
            "0, nyse, 1.0, 99.0",
            "1, cme, 0.0, 100.5",
            "",
        ]
        parsed = parse_snapshot_lines(lines)
        assert set(parsed) == {(0, "nyse"), (1, "cme")}
        assert parsed[(0, "nyse")][1].price == 99.0

    def test_parse_error(self):
        with pytest.raises(ParseError):
            parse_snapshot_lines(["0, nyse, 1.0"])

    def test_curve_record(self):
        curve = Eldf(0.5, 0.1, 2.0, side=BID, slot_id=3, v_lo=0.0, v_hi=4.0)
        assert curve.to_record() == (3, BID, 0.5, 0.1, 2.0, 0.0, 4.0)


class TestCurvePoint:
    def test_invalid_price(self):
        with pytest.raises(NonPositiveDensity):
            CurvePoint(0.0, 0.0)

    def test_negative_volume(self):
        with pytest.raises(NonMonotoneVolumes):
            CurvePoint(-1.0, 1.0)


class TestAssetCurves:
    def test_reset_clears_marks(self, unit_curve):
        ac = AssetCurves("X", unit_curve("bid"), unit_curve("ask"))
        ac.bid_mark = 5.0
        ac.ask_mark = 3.0
        ac.reset(unit_curve("bid"), unit_curve("ask"))
        assert ac.bid_mark == 0.0 and ac.ask_mark == 0.0


@given(
    c1=st.floats(min_value=0.0, max_value=2.0),
    c0=st.floats(min_value=0.1, max_value=5.0),
    span=st.floats(min_value=1.0, max_value=50.0),
)
@settings(max_examples=60, deadline=None)
def test_integration_additivity_hypothesis(c1, c0, span):
    curve = Eldf(0.0, c1, c0, v_lo=0.0, v_hi=span)
    a, b, c = 0.1 * span, 0.4 * span, 0.9 * span
    whole = integrate_eldf(curve, a, c)
    split = integrate_eldf(curve, a, b) + integrate_eldf(curve, b, c)
    assert math.isclose(whole, split, rel_tol=1e-9, abs_tol=1e-12)
