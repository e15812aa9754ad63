"""Search module: curve fitting oracles, bracketing, and convergence."""

import json
import math

import numpy as np
import pytest

from pump import designs
from pump.designs import DesignError, DesignParams, EffectSpec
from pump.engine import PowerRequest, pump_power
from pump.search import (
    CurveInversionError,
    PowerCurve,
    SearchGoal,
    _per_outcome_targets,
    _walk_down_flat,
    fit_power_curve,
    initial_bounds,
    pump_mdes,
    pump_sample,
)


def _mdes_request(M=1, mtps=("None",), numZero=0, **kw):
    params = DesignParams(
        M=M, nbar=kw.pop("nbar", 50), J=kw.pop("J", 20), Tbar=0.5,
        ICC_2=0.1, R2_1=0.1,
    )
    effects = EffectSpec(MDES=0.0, numZero=numZero)
    return PowerRequest(
        design="d2.1_m2fc", params=params, effects=effects,
        mtps=tuple(mtps), rho=kw.pop("rho", 0.0), **kw,
    )


# ---------------------------------------------------------------------------
# Curve fitting.

def test_fit_recovers_exact_logistic():
    k, x0 = 2.0, 5.0
    xs = np.linspace(2.0, 8.0, 9)
    pts = [(float(x), 1.0 / (1.0 + math.exp(-k * (x - x0))), 1000.0) for x in xs]
    curve = fit_power_curve(pts)
    assert curve.L == 1.0
    assert curve.k == pytest.approx(k, abs=1e-6)
    assert curve.x0 == pytest.approx(x0, abs=1e-6)


def test_two_point_inversion_lands_inside():
    curve = fit_power_curve([(10.0, 0.2, 1.0), (50.0, 0.9, 1.0)])
    assert 10.0 < curve.invert(0.8) < 50.0


def test_weighted_duplicates_pull_toward_heavy_point():
    # Frozen from a brute-force grid minimization of sum w*(p - f(x))^2
    # over (k, x0), refined to p(0) = 0.5496962159.
    pts = [(-2.0, 0.03, 1.0), (0.0, 0.4, 1.0), (0.0, 0.6, 3.0), (2.0, 0.97, 1.0)]
    curve = fit_power_curve(pts)
    fitted = curve(0.0)
    assert 0.4 < fitted < 0.6
    assert abs(fitted - 0.6) < abs(fitted - 0.4)
    assert fitted == pytest.approx(0.5496962159, abs=1e-3)


def test_fit_needs_two_distinct_values():
    with pytest.raises(DesignError, match="distinct probe"):
        fit_power_curve([(1.0, 0.5, 1.0), (1.0, 0.6, 1.0)])


def test_inversion_outside_ceiling_asks_for_wider_bracket():
    curve = PowerCurve(L=0.6, k=1.0, x0=0.0)
    with pytest.raises(CurveInversionError, match="extend bracket"):
        curve.invert(0.8)
    assert curve.invert(0.3) == pytest.approx(0.0)


def test_fitted_ceiling_stays_below_one_for_plateaued_probes():
    rng = np.random.default_rng(2)
    xs = np.linspace(0.0, 10.0, 12)
    truth = 0.55 / (1.0 + np.exp(-1.5 * (xs - 3.0)))
    pts = [(float(x), float(p + rng.normal(0, 0.005)), 2000.0) for x, p in zip(xs, truth)]
    curve = fit_power_curve(pts)
    assert curve.L == pytest.approx(0.55, abs=0.02)


# ---------------------------------------------------------------------------
# Brackets.

def test_per_outcome_target_transforms():
    assert _per_outcome_targets("D1indiv", 5, 0.8) == (0.8, 0.8)
    assert _per_outcome_targets("mean", 5, 0.8) == (0.8, 0.8)
    low, high = _per_outcome_targets("min1", 5, 0.8)
    assert low == pytest.approx(0.275220336322, abs=1e-12)
    assert high == 0.8
    low, high = _per_outcome_targets("complete", 5, 0.8)
    assert low == 0.8
    assert high == pytest.approx(0.956352499790, abs=1e-12)
    low, high = _per_outcome_targets("min2", 5, 0.8)
    assert low == pytest.approx(0.275220336322, abs=1e-12)
    assert high == pytest.approx(0.956352499790, abs=1e-12)
    assert _per_outcome_targets("min1", 1, 0.8) == (0.8, 0.8)


def test_single_outcome_bracket_contains_analytic_mdes():
    req = _mdes_request()
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    params, _ = designs.validate(req.design, req.params, req.effects)
    df = designs.degrees_of_freedom(req.design, params)
    analytic = designs.mdes_multiplier(df, 0.05, 0.2) * designs.standard_error(
        req.design, params
    )
    lo, hi = initial_bounds(goal, req)
    assert lo == pytest.approx(analytic * 0.8)
    assert hi == pytest.approx(analytic * 1.25)
    assert lo < analytic < hi


def test_multi_outcome_bracket_straddles_unadjusted_answer():
    req5 = _mdes_request(M=5, mtps=("BF",))
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    lo5, hi5 = initial_bounds(goal, req5)
    params, _ = designs.validate(req5.design, req5.params, req5.effects)
    df = designs.degrees_of_freedom(req5.design, params)
    unadjusted = designs.mdes_multiplier(df, 0.05, 0.2) * designs.standard_error(
        req5.design, params
    )
    # Lower end uses plain alpha, upper end alpha/M, so the unadjusted
    # answer is the bracket's floor and the adjusted answer sits above it.
    assert lo5 == pytest.approx(unadjusted)
    assert hi5 > lo5


def test_sample_bracket_contains_fixed_point():
    req = PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(M=1, nbar=50, J=10, Tbar=0.5, ICC_2=0.1, R2_1=0.1),
        effects=EffectSpec(MDES=0.2), mtps=("None",),
    )
    goal = SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.8)
    lo, hi = initial_bounds(goal, req)
    assert lo < 12.755 < hi


# ---------------------------------------------------------------------------
# MDES search.

def test_single_outcome_mdes_matches_analytic():
    req = _mdes_request()
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    result = pump_mdes(goal, req, seed=4)
    assert result.converged
    params, _ = designs.validate(req.design, req.params, req.effects)
    df = designs.degrees_of_freedom(req.design, params)
    analytic = designs.mdes_multiplier(df, 0.05, 0.2) * designs.standard_error(
        req.design, params
    )
    assert result.value == pytest.approx(analytic, rel=0.05)
    assert abs(result.achieved_power - 0.8) <= goal.tol


def test_mdes_round_trip_reproduces_target():
    req = _mdes_request(M=3, mtps=("HO",), rho=0.3)
    goal = SearchGoal(quantity="MDES", power_definition="min1", target_power=0.75)
    result = pump_mdes(goal, req, seed=9)
    assert result.converged
    check = pump_power(
        PowerRequest(
            design=req.design, params=req.params,
            effects=EffectSpec(MDES=result.value), mtps=("HO",), rho=0.3,
            tnum=goal.final_tnum,
        ),
        seed=77,
    )
    power, mc_se = check.cell("HO", "min1")
    assert abs(power - 0.75) <= goal.tol + 3 * mc_se


def test_mdes_grows_with_target_power():
    req = _mdes_request(M=2, mtps=("BF",))
    lo = pump_mdes(
        SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.7),
        req, seed=5,
    )
    hi = pump_mdes(
        SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.9),
        req, seed=5,
    )
    assert lo.converged and hi.converged
    assert hi.value >= lo.value


def test_mdes_applies_to_non_zeroed_outcomes_only():
    req = _mdes_request(M=3, mtps=("BF",), numZero=1)
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.7)
    result = pump_mdes(goal, req, seed=6)
    assert result.converged
    assert result.value > 0


# ---------------------------------------------------------------------------
# Sample search.

def test_sample_matches_closed_form_at_single_outcome():
    # Fixed point of J = closed_form(MT(df(J))) is 12.755, so the smallest
    # integer meeting the target is 13.
    req = PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(M=1, nbar=50, J=10, Tbar=0.5, ICC_2=0.1, R2_1=0.1),
        effects=EffectSpec(MDES=0.2), mtps=("None",),
    )
    goal = SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.8)
    result = pump_sample(goal, req, seed=12)
    assert result.converged
    assert result.value == 13
    assert isinstance(result.value, int)


def test_sample_size_rises_with_target_power():
    req = PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(M=2, nbar=30, J=10, Tbar=0.5, ICC_2=0.1, R2_1=0.1),
        effects=EffectSpec(MDES=0.2), mtps=("BF",), rho=0.2,
    )
    low = pump_sample(
        SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.6),
        req, seed=15,
    )
    high = pump_sample(
        SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.9),
        req, seed=15,
    )
    assert low.converged and high.converged
    assert low.value <= high.value


def test_flat_power_curve_reports_lower_edge():
    # Random-intercept design: nbar cannot push power past the between-group
    # variance floor, so a wide range of nbar sits inside the band.  The
    # certified edge can land a few integers above the true crossing (~21)
    # when the certification draw dips below the band, but it must stay far
    # below the initial bracket ceiling.
    req = PowerRequest(
        design="d2.2_m2rc",
        params=DesignParams(M=1, nbar=10, J=40, Tbar=0.5, ICC_2=0.2, R2_1=0.1),
        effects=EffectSpec(MDES=0.43), mtps=("None",),
    )
    goal = SearchGoal(
        quantity="nbar", power_definition="D1indiv", target_power=0.8, tol=0.02
    )
    result = pump_sample(goal, req, seed=3)
    assert result.converged
    assert result.flat_region
    assert abs(result.achieved_power - 0.8) <= goal.tol
    assert result.value <= 40


def test_walk_down_flat_prefers_certified_edge():
    goal = SearchGoal(quantity="nbar", power_definition="D1indiv", target_power=0.8)
    curve = lambda x: 0.8 if x >= 20 else 0.5  # noqa: E731
    certify = lambda value, tnum: (0.801, 0.002)  # noqa: E731
    value, power, mc_se, flat = _walk_down_flat(curve, certify, 34, goal, 2)
    assert (value, flat) == (20, True)
    assert power == pytest.approx(0.801)

    missed = lambda value, tnum: (0.70, 0.002)  # noqa: E731
    value, power, mc_se, flat = _walk_down_flat(curve, missed, 34, goal, 2)
    assert (value, flat) == (34, True)
    assert math.isnan(power)

    value, power, mc_se, flat = _walk_down_flat(curve, certify, 21, goal, 2)
    assert (value, flat) == (21, False)


# ---------------------------------------------------------------------------
# Loop mechanics.

def test_initial_probes_are_equally_spaced():
    req = _mdes_request()
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    result = pump_mdes(goal, req, seed=4)
    first = result.trace[:5]
    values = [pt.value for pt in first]
    gaps = np.diff(values)
    assert np.allclose(gaps, gaps[0])
    assert all(pt.tnum == goal.start_tnum for pt in first)
    assert all(pt.weight == pt.tnum for pt in result.trace)


def test_search_is_deterministic_under_seed():
    req = _mdes_request(M=2, mtps=("BF",))
    goal = SearchGoal(quantity="MDES", power_definition="min1", target_power=0.7)
    a = pump_mdes(goal, req, seed=21)
    b = pump_mdes(goal, req, seed=21)
    assert a.value == b.value
    assert a.trace == b.trace


def test_non_convergence_returns_flagged_best_candidate():
    req = _mdes_request()
    goal = SearchGoal(
        quantity="MDES", power_definition="D1indiv", target_power=0.8,
        tol=1e-6, start_tnum=200, tnum=400, final_tnum=800, max_steps=2,
    )
    result = pump_mdes(goal, req, seed=30)
    assert not result.converged
    assert result.steps == 2
    assert math.isfinite(result.value) and result.value > 0
    assert result.trace


def test_result_serializes_to_json():
    req = _mdes_request()
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    result = pump_mdes(goal, req, seed=4)
    blob = json.loads(json.dumps(result.to_dict()))
    assert blob["quantity"] == "MDES"
    assert blob["converged"] is True
    assert len(blob["trace"]) == len(result.trace)
    assert blob["curve"] == [list(pair) for pair in result.curve]


def test_result_carries_fitted_curve_samples():
    req = _mdes_request()
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    result = pump_mdes(goal, req, seed=4)
    assert len(result.curve) == 41
    values = [pt.value for pt in result.trace]
    xs = [x for x, _ in result.curve]
    assert xs[0] == pytest.approx(min(values))
    assert xs[-1] == pytest.approx(max(values))
    assert xs == sorted(xs)
    assert all(0.0 <= p <= 1.0 for _, p in result.curve)
    # The drawn curve should pass near its own certified answer.
    idx = min(range(41), key=lambda i: abs(xs[i] - result.value))
    assert abs(result.curve[idx][1] - goal.target_power) < 0.1


# ---------------------------------------------------------------------------
# Validation.

def test_goal_validation_errors():
    req = _mdes_request(M=3, mtps=("BF",))
    goal = SearchGoal(quantity="MDES", power_definition="min1", target_power=0.8)
    with pytest.raises(DesignError, match="exactly one MTP"):
        pump_mdes(goal, _mdes_request(M=3, mtps=("BF", "HO")), seed=1)
    with pytest.raises(DesignError, match="unknown search quantity"):
        pump_sample(
            SearchGoal(quantity="keys", power_definition="min1", target_power=0.8),
            req, seed=1,
        )
    with pytest.raises(DesignError, match="start_tnum <= tnum <= final_tnum"):
        pump_mdes(
            SearchGoal(
                quantity="MDES", power_definition="min1", target_power=0.8,
                start_tnum=500, tnum=100, final_tnum=50,
            ),
            req, seed=1,
        )
    with pytest.raises(DesignError, match="target_power"):
        pump_mdes(
            SearchGoal(quantity="MDES", power_definition="min1", target_power=1.2),
            req, seed=1,
        )


def test_unadjusted_multi_outcome_min_goal_is_rejected():
    req = _mdes_request(M=3, mtps=("None",))
    goal = SearchGoal(quantity="MDES", power_definition="min1", target_power=0.8)
    with pytest.raises(DesignError, match="not reported without"):
        pump_mdes(goal, req, seed=1)


def test_complete_goal_requires_no_zeroed_outcomes():
    req = _mdes_request(M=3, mtps=("BF",), numZero=1)
    goal = SearchGoal(quantity="MDES", power_definition="complete", target_power=0.8)
    with pytest.raises(DesignError, match="complete power is undefined"):
        pump_mdes(goal, req, seed=1)


def test_missing_size_dimension_is_rejected():
    req = PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(M=1, nbar=30, J=10, Tbar=0.5, ICC_2=0.1, R2_1=0.1),
        effects=EffectSpec(MDES=0.2), mtps=("None",),
    )
    with pytest.raises(DesignError, match="does not exist"):
        pump_sample(
            SearchGoal(quantity="K", power_definition="D1indiv", target_power=0.8),
            req, seed=1,
        )


def test_sample_search_needs_positive_effect():
    req = PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(M=1, nbar=30, J=10, Tbar=0.5, ICC_2=0.1, R2_1=0.1),
        effects=EffectSpec(MDES=0.0), mtps=("None",),
    )
    with pytest.raises(DesignError, match="positive MDES"):
        pump_sample(
            SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.8),
            req, seed=1,
        )


def test_entry_points_check_quantity_kind():
    req = _mdes_request()
    with pytest.raises(DesignError, match="pump_mdes requires"):
        pump_mdes(
            SearchGoal(quantity="J", power_definition="D1indiv", target_power=0.8),
            req, seed=1,
        )
    with pytest.raises(DesignError, match="pump_sample requires"):
        pump_sample(
            SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8),
            req, seed=1,
        )
