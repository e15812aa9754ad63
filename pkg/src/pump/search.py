"""Stochastic root-finding for MDES and sample-size targets.

Brackets the answer with closed-form bounds, probes the power curve with
Monte Carlo evaluations of increasing precision, fits a scaled logistic
through the probes, and certifies the inverted candidate at a high draw
count before reporting it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import designs
from .designs import DesignError, EffectSpec
from .engine import PowerRequest, check_definition, pump_power
from .seeding import DEFAULT_SEED, SEARCH_STREAM, stream

QUANTITIES = ("MDES", "nbar", "J", "K")

# Normal-limit df used for the lower sample-size bound; the true df is not
# known until a size is chosen, so the bound uses the most optimistic value.
_BIG_DF = 1e6

_MDES_FLOOR = 1e-9


class CurveInversionError(RuntimeError):
    """The fitted curve cannot produce the target; caller should extend bracket."""


@dataclass(frozen=True)
class SearchGoal:
    """What to solve for and how hard to try."""

    quantity: str
    power_definition: str
    target_power: float
    tol: float = 0.01
    start_tnum: int = 1000
    tnum: int = 3000
    final_tnum: int = 20_000
    max_steps: int = 30


@dataclass(frozen=True)
class ProbePoint:
    value: float
    tnum: int
    power: float
    weight: float


@dataclass(frozen=True)
class SearchResult:
    quantity: str
    value: float
    achieved_power: float
    mc_se: float
    steps: int
    trace: tuple[ProbePoint, ...]
    converged: bool
    flat_region: bool = False
    curve: tuple[tuple[float, float], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "achieved_power": self.achieved_power,
            "mc_se": self.mc_se,
            "steps": self.steps,
            "converged": self.converged,
            "flat_region": self.flat_region,
            "curve": [[v, p] for v, p in self.curve],
            "trace": [
                {
                    "value": pt.value,
                    "tnum": pt.tnum,
                    "power": pt.power,
                    "weight": pt.weight,
                }
                for pt in self.trace
            ],
        }


# ---------------------------------------------------------------------------
# Logistic curve fitting.

@dataclass(frozen=True)
class PowerCurve:
    """Scaled logistic p(x) = L / (1 + exp(-k (x - x0))), increasing in x."""

    L: float
    k: float
    x0: float

    def __call__(self, x: Any) -> Any:
        z = np.clip(-self.k * (np.asarray(x, dtype=float) - self.x0), -700, 700)
        out = self.L / (1.0 + np.exp(z))
        return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out

    def invert(self, target: float) -> float:
        if not 0 < target < self.L:
            raise CurveInversionError(
                f"extend bracket: target {target:g} outside fitted range (0, {self.L:g})"
            )
        return self.x0 - math.log(self.L / target - 1.0) / self.k


def fit_power_curve(points: list[tuple[float, float, float]]) -> PowerCurve:
    """Weighted least-squares logistic through (value, power, weight) probes.

    The ceiling L stays fixed at 1 unless the best probe plateaus below
    0.95, in which case L is fitted so flat sub-unity curves (zeroed
    outcomes, unreachable definitions) stay describable.
    """
    xs = np.asarray([p[0] for p in points], dtype=float)
    ps = np.clip(np.asarray([p[1] for p in points], dtype=float), 1e-12, 1.0)
    ws = np.asarray([p[2] for p in points], dtype=float)
    if xs.size < 2 or np.unique(xs).size < 2:
        raise DesignError(["need at least 2 distinct probe values to fit a curve"])
    if np.any(~np.isfinite(ps)) or np.any(ws <= 0):
        raise DesignError(["probe powers must be finite and weights positive"])

    span = float(xs.max() - xs.min())
    x0_guess = float(xs[np.argmin(np.abs(ps - 0.5))])
    k_guess = 4.0 / span
    sigma = 1.0 / np.sqrt(ws)
    fit_ceiling = float(ps.max()) < 0.95

    def _run(model, p0, bounds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(
                model, xs, ps, p0=p0, sigma=sigma, bounds=bounds,
                method="trf", maxfev=20_000,
            )
        return popt

    try:
        if fit_ceiling:
            def model(x, L, k, x0):
                return L / (1.0 + np.exp(np.clip(-k * (x - x0), -700, 700)))

            L0 = min(1.0, float(ps.max()) + 0.05)
            popt = _run(
                model,
                (L0, k_guess, x0_guess),
                ((1e-3, 1e-12, -np.inf), (1.0, np.inf, np.inf)),
            )
            return PowerCurve(L=float(popt[0]), k=float(popt[1]), x0=float(popt[2]))

        def model(x, k, x0):
            return 1.0 / (1.0 + np.exp(np.clip(-k * (x - x0), -700, 700)))

        popt = _run(model, (k_guess, x0_guess), ((1e-12, -np.inf), (np.inf, np.inf)))
        return PowerCurve(L=1.0, k=float(popt[0]), x0=float(popt[1]))
    except (RuntimeError, ValueError) as exc:
        raise CurveInversionError(f"extend bracket: curve fit failed ({exc})") from exc


# ---------------------------------------------------------------------------
# Closed-form bracketing.

def _per_outcome_targets(definition: str, M: int, target: float) -> tuple[float, float]:
    """Per-outcome power targets for the (lower, upper) bracket ends.

    The lower end pairs with unadjusted alpha, the upper with alpha/M.
    Minimal definitions relax the lower end (one success out of M is
    enough); complete tightens the upper end (all M must succeed).
    Correlation between outcomes is deliberately ignored here.
    """
    if M == 1:
        return target, target
    if definition == "complete":
        return target, target ** (1.0 / M)
    if definition.startswith("min"):
        low = 1.0 - (1.0 - target) ** (1.0 / M)
        d = int(definition[3:])
        return (low, target) if d == 1 else (low, target ** (1.0 / M))
    return target, target


def _min_feasible_size(design: str, p: designs.DesignParams, level: str) -> int:
    for value in range(1, 1_000_001):
        trial = designs.with_size(p, level, value)
        try:
            designs.degrees_of_freedom(design, trial)
            q = designs.standard_errors(design, trial)
        except DesignError:
            continue
        if np.all(np.isfinite(q)) and np.all(q > 0):
            return value
    raise DesignError([f"no feasible {level} found for {design}"])


def initial_bounds(goal: SearchGoal, req: PowerRequest) -> tuple[float, float]:
    """Closed-form bracket for the searched quantity."""
    params, effects = designs.validate(
        req.design, req.params, req.effects, goal.power_definition
    )
    M = params.M
    alpha = float(np.asarray(params.alpha).flat[0])
    pi_lo, pi_hi = _per_outcome_targets(goal.power_definition, M, goal.target_power)

    if goal.quantity == "MDES":
        df = designs.degrees_of_freedom(req.design, params)
        Q = designs.standard_errors(req.design, params)
        live = Q[: M - effects.numZero] if effects.numZero else Q
        mt_lo = designs.mdes_multiplier(df, alpha, 1.0 - pi_lo, params.two_sided)
        mt_hi = designs.mdes_multiplier(df, alpha / M, 1.0 - pi_hi, params.two_sided)
        lo = mt_lo * float(live.min())
        hi = mt_hi * float(live.max())
        if M == 1 or hi <= lo * (1 + 1e-9):
            lo, hi = lo * 0.8, max(hi, lo) * 1.25
        return lo, hi

    level = goal.quantity
    mdes = effects.MDES
    live_idx = [m for m in range(M - effects.numZero) if mdes[m] > 0]
    if not live_idx:
        raise DesignError(["sample-size search requires a positive MDES"])
    floor = _min_feasible_size(req.design, params, level)

    mt_lo = designs.mdes_multiplier(_BIG_DF, alpha, 1.0 - pi_lo, params.two_sided)
    lo_real = min(
        designs.closed_form_sample_size(req.design, params, float(mdes[m]), mt_lo, level, m)
        for m in live_idx
    )
    lo = max(math.ceil(lo_real - 1e-9), floor)

    df_lo = designs.degrees_of_freedom(
        req.design, designs.with_size(params, level, lo)
    )
    mt_hi = designs.mdes_multiplier(df_lo, alpha / M, 1.0 - pi_hi, params.two_sided)
    hi_real = max(
        designs.closed_form_sample_size(req.design, params, float(mdes[m]), mt_hi, level, m)
        for m in live_idx
    )
    hi = max(math.ceil(hi_real), lo + 1)
    if M == 1:
        lo, hi = max(floor, math.floor(lo * 0.8)), math.ceil(hi * 1.25)
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# Shared search loop.

def _check_goal(goal: SearchGoal, req: PowerRequest, M: int) -> None:
    errors = []
    if goal.quantity not in QUANTITIES:
        errors.append(
            f"unknown search quantity {goal.quantity!r}; valid: {', '.join(QUANTITIES)}"
        )
    if not 0 < goal.target_power < 1:
        errors.append(f"target_power must be in (0,1), got {goal.target_power}")
    if goal.tol <= 0:
        errors.append(f"tol must be positive, got {goal.tol}")
    if not 1 <= goal.start_tnum <= goal.tnum <= goal.final_tnum:
        errors.append(
            "draw counts must satisfy 1 <= start_tnum <= tnum <= final_tnum, got "
            f"{goal.start_tnum}, {goal.tnum}, {goal.final_tnum}"
        )
    if goal.max_steps < 1:
        errors.append(f"max_steps must be >= 1, got {goal.max_steps}")
    if len(req.mtps) != 1:
        errors.append(
            f"search requires exactly one MTP, got {len(req.mtps)}"
        )
    if goal.quantity != "MDES" and goal.quantity not in designs.size_names(req.design):
        errors.append(f"size dimension {goal.quantity!r} does not exist for {req.design}")
    if errors:
        raise DesignError(errors)
    check_definition(goal.power_definition, M)
    if (
        req.mtps[0] == "None"
        and M > 1
        and (goal.power_definition.startswith("min") or goal.power_definition == "complete")
    ):
        raise DesignError(
            [f"{goal.power_definition} is not reported without a p-value adjustment"]
        )


def _derived_seed(base: int, index: int) -> int:
    rng = stream(base, SEARCH_STREAM, index)
    return int(rng.integers(0, 2**63 - 1))


class _Evaluator:
    """Runs pump_power at candidate values, caching repeats and logging a trace."""

    def __init__(self, goal: SearchGoal, req: PowerRequest, seed: int):
        self.goal = goal
        self.req = req
        self.seed = seed
        self.mtp = req.mtps[0]
        self.trace: list[ProbePoint] = []
        self._cache: dict[tuple[float, int], tuple[float, float]] = {}
        self._count = 0

    def _with_value(self, value: float) -> PowerRequest:
        if self.goal.quantity == "MDES":
            effects = replace(self.req.effects, MDES=float(value))
            return replace(self.req, effects=effects)
        params = designs.with_size(self.req.params, self.goal.quantity, int(value))
        return replace(self.req, params=params)

    def __call__(self, value: float, tnum: int) -> tuple[float, float]:
        # Certification runs are never cached: a borderline candidate gets a
        # fresh draw each attempt instead of replaying one unlucky batch.
        cacheable = tnum < self.goal.final_tnum
        key = (float(value), int(tnum))
        if cacheable and key in self._cache:
            return self._cache[key]
        table = pump_power(
            replace(self._with_value(value), tnum=int(tnum)),
            seed=_derived_seed(self.seed, self._count),
        )
        self._count += 1
        power, mc_se = table.cell(self.mtp, self.goal.power_definition)
        if cacheable:
            self._cache[key] = (power, mc_se)
        self.trace.append(
            ProbePoint(value=float(value), tnum=int(tnum), power=power, weight=float(tnum))
        )
        return power, mc_se


def _initial_values(lo: float, hi: float, integer: bool, floor: int) -> list[float]:
    xs = np.linspace(lo, hi, 5)
    if not integer:
        return [float(x) for x in xs]
    vals = sorted({max(math.ceil(x - 1e-9), floor) for x in xs})
    if len(vals) < 2:
        vals.append(vals[0] + 1)
    return [float(v) for v in vals]


def _best_effort(trace: list[ProbePoint], goal: SearchGoal) -> ProbePoint:
    serious = [pt for pt in trace if pt.tnum >= goal.tnum] or trace
    return min(serious, key=lambda pt: abs(pt.power - goal.target_power))


def _walk_down_flat(
    curve: PowerCurve,
    evaluate: _Evaluator,
    value: int,
    goal: SearchGoal,
    floor: int,
) -> tuple[int, float, float, bool]:
    """Report the lower edge when the fitted curve is flat at the target.

    Lower-level sizes often produce power curves that plateau; the first
    certified integer can then be far above the cheapest one that works.
    """
    target, tol = goal.target_power, goal.tol
    edge = value
    while edge - 1 >= floor and abs(curve(edge - 1) - target) <= tol:
        edge -= 1
    if value - edge + 1 < 3:
        return value, math.nan, math.nan, False
    power, mc_se = evaluate(edge, goal.final_tnum)
    if abs(power - target) <= tol:
        return edge, power, mc_se, True
    return value, math.nan, math.nan, True


def _curve_samples(
    curve: PowerCurve | None, trace: Sequence[ProbePoint]
) -> tuple[tuple[float, float], ...]:
    """Evaluate the last fitted curve across the probed range so clients can
    draw it without refitting anything."""
    if curve is None or not trace:
        return ()
    values = [pt.value for pt in trace]
    xs = np.linspace(min(values), max(values), 41)
    return tuple((float(x), float(curve(float(x)))) for x in xs)


def _search(goal: SearchGoal, req: PowerRequest, seed: int | None) -> SearchResult:
    seed = DEFAULT_SEED if seed is None else int(seed)
    params, _ = designs.validate(
        req.design, req.params, req.effects, goal.power_definition
    )
    _check_goal(goal, req, params.M)

    integer = goal.quantity != "MDES"
    lo, hi = initial_bounds(goal, req)
    floor = (
        _min_feasible_size(req.design, params, goal.quantity) if integer else 0
    )
    top_level = integer and goal.quantity == designs.top_level_size(req.design)

    evaluate = _Evaluator(goal, req, seed)
    for x in _initial_values(lo, hi, integer, floor):
        evaluate(x, goal.start_tnum)

    target, tol = goal.target_power, goal.tol
    cur_tnum = goal.tnum
    uncertified = 0
    steps = 0

    last_fit: PowerCurve | None = None
    while steps < goal.max_steps:
        steps += 1
        points = [(pt.value, pt.power, pt.weight) for pt in evaluate.trace]
        try:
            curve = fit_power_curve(points)
            last_fit = curve
            cand = curve.invert(target)
        except CurveInversionError:
            # Bracket missed the answer; push the short side out and look again.
            width = max(hi - lo, 1.0 if integer else abs(hi) * 0.25 + 1e-6)
            if all(pt.power < target for pt in evaluate.trace):
                hi = hi + width
                probe = hi
            else:
                lo = max(floor if integer else _MDES_FLOOR, lo - width)
                probe = lo
            if integer:
                probe = max(math.ceil(probe), floor)
            evaluate(probe, cur_tnum)
            uncertified += 1
            if uncertified % 2 == 0:
                cur_tnum = min(cur_tnum * 2, goal.final_tnum)
            continue

        if cand > hi:
            hi = cand + (hi - lo)
        if cand < lo:
            lo = max(floor if integer else _MDES_FLOOR, cand - (hi - lo))
        if integer:
            # Smallest certified integer wins, so try the floor before the
            # ceiling; integer jumps can straddle the target band.
            candidates = sorted(
                {max(math.floor(cand + 1e-9), floor), max(math.ceil(cand - 1e-9), floor)}
            )
        else:
            candidates = [max(cand, _MDES_FLOOR)]

        cand = candidates[0]
        power = None
        for option in candidates:
            power, _ = evaluate(option, cur_tnum)
            if abs(power - target) <= tol:
                cand = option
                break
        if power is not None and abs(power - target) <= tol:
            achieved, mc_se = evaluate(cand, goal.final_tnum)
            if abs(achieved - target) <= tol:
                value = int(cand) if integer else float(cand)
                flat = False
                if integer and not top_level:
                    points = [(pt.value, pt.power, pt.weight) for pt in evaluate.trace]
                    try:
                        refit = fit_power_curve(points)
                        last_fit = refit
                    except (CurveInversionError, DesignError):
                        refit = curve
                    value, walked_p, walked_se, flat = _walk_down_flat(
                        refit, evaluate, int(cand), goal, floor
                    )
                    if value != int(cand):
                        achieved, mc_se = walked_p, walked_se
                return SearchResult(
                    quantity=goal.quantity,
                    value=value,
                    achieved_power=achieved,
                    mc_se=mc_se,
                    steps=steps,
                    trace=tuple(evaluate.trace),
                    converged=True,
                    flat_region=flat,
                    curve=_curve_samples(last_fit, evaluate.trace),
                )
        uncertified += 1
        if uncertified % 2 == 0:
            cur_tnum = min(cur_tnum * 2, goal.final_tnum)

    best = _best_effort(evaluate.trace, goal)
    n = best.tnum
    return SearchResult(
        quantity=goal.quantity,
        value=int(best.value) if integer else float(best.value),
        achieved_power=best.power,
        mc_se=float(np.sqrt(best.power * (1 - best.power) / n)),
        steps=steps,
        trace=tuple(evaluate.trace),
        converged=False,
        flat_region=False,
        curve=_curve_samples(last_fit, evaluate.trace),
    )


# ---------------------------------------------------------------------------
# Public entry points.

def pump_mdes(goal: SearchGoal, req: PowerRequest, seed: int | None = None) -> SearchResult:
    """Smallest effect size reaching the target power, applied to all
    non-zeroed outcomes."""
    if goal.quantity != "MDES":
        raise DesignError([f"pump_mdes requires quantity='MDES', got {goal.quantity!r}"])
    return _search(goal, req, seed)


def pump_sample(goal: SearchGoal, req: PowerRequest, seed: int | None = None) -> SearchResult:
    """Smallest certified sample size at one level reaching the target power."""
    if goal.quantity == "MDES":
        raise DesignError(["pump_sample requires quantity in {'nbar','J','K'}"])
    return _search(goal, req, seed)
