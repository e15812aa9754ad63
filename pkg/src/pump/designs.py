"""Design/model taxonomy for multilevel randomized trials.

Eleven supported design codes, their effect-size standard errors Q, degrees
of freedom, and closed-form sample-size inversions. Everything in this module
is pure algebra; simulation lives in the engine.

A design code reads d<levels>.<randomization level>_m<model>, where the model
part encodes how intercepts and treatment impacts are handled at each level
(f fixed, r random, c constant).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from scipy import stats


class DesignError(ValueError):
    """Validation failure. Carries one message per violation."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InfeasibleDesignError(ValueError):
    """A closed-form sample-size inversion has no positive solution."""


@dataclass(frozen=True, eq=False)
class DesignParams:
    """Sample-size and variance-decomposition parameters.

    Per-outcome fields (R2_*, ICC_*, omega_*) accept scalars or length-M
    sequences; `validate` broadcasts them to numpy vectors. J and K must be
    left as None for designs without those levels.
    """

    M: int
    nbar: float
    Tbar: float
    J: float | None = None
    K: float | None = None
    numCovar_1: int = 0
    numCovar_2: int = 0
    numCovar_3: int = 0
    R2_1: Any = 0.0
    R2_2: Any = 0.0
    R2_3: Any = 0.0
    ICC_2: Any = 0.0
    ICC_3: Any = 0.0
    omega_2: Any = 0.0
    omega_3: Any = 0.0
    alpha: float = 0.05
    two_sided: bool = True


@dataclass(frozen=True, eq=False)
class EffectSpec:
    """Effect sizes in control-group standard-deviation units.

    MDES may be a scalar (applied to all non-zeroed outcomes) or a length-M
    vector whose last numZero entries are zero.
    """

    MDES: Any = 0.0
    numZero: int = 0


# JSON/config spellings (paper-style dotted names) to dataclass fields.
DESIGN_PARAM_KEYS: dict[str, str] = {
    "M": "M",
    "nbar": "nbar",
    "J": "J",
    "K": "K",
    "Tbar": "Tbar",
    "numCovar.1": "numCovar_1",
    "numCovar.2": "numCovar_2",
    "numCovar.3": "numCovar_3",
    "R2.1": "R2_1",
    "R2.2": "R2_2",
    "R2.3": "R2_3",
    "ICC.2": "ICC_2",
    "ICC.3": "ICC_3",
    "omega.2": "omega_2",
    "omega.3": "omega_3",
    "alpha": "alpha",
    "two_sided": "two_sided",
}
EFFECT_PARAM_KEYS: dict[str, str] = {"MDES": "MDES", "numZero": "numZero"}

_FIELD_TO_KEY = {v: k for k, v in DESIGN_PARAM_KEYS.items()}


def _pq(p: DesignParams) -> float:
    return p.Tbar * (1.0 - p.Tbar)


# ---------------------------------------------------------------------------
# Standard errors Q (vectorized over outcomes).

def _se_m1c(p):
    return np.sqrt((1 - p.R2_1) / (_pq(p) * p.nbar))


def _se_m2f(p):
    # Constant and fixed treatment effects share one Q; only df differs.
    return np.sqrt((1 - p.ICC_2) * (1 - p.R2_1) / (_pq(p) * p.J * p.nbar))


def _se_m2r(p):
    return np.sqrt(
        p.ICC_2 * p.omega_2 / p.J
        + (1 - p.ICC_2) * (1 - p.R2_1) / (_pq(p) * p.J * p.nbar)
    )


def _se_m2rc(p):
    return np.sqrt(
        p.ICC_2 * (1 - p.R2_2) / (_pq(p) * p.J)
        + (1 - p.ICC_2) * (1 - p.R2_1) / (_pq(p) * p.J * p.nbar)
    )


def _se_m3rr2rr(p):
    return np.sqrt(
        p.ICC_3 * p.omega_3 / p.K
        + p.ICC_2 * p.omega_2 / (p.J * p.K)
        + (1 - p.ICC_2 - p.ICC_3) * (1 - p.R2_1) / (_pq(p) * p.J * p.K * p.nbar)
    )


def _se_m3f2rc(p):
    return np.sqrt(
        p.ICC_2 * (1 - p.R2_2) / (_pq(p) * p.J * p.K)
        + (1 - p.ICC_2 - p.ICC_3) * (1 - p.R2_1) / (_pq(p) * p.J * p.K * p.nbar)
    )


def _se_m3rr2rc(p):
    return np.sqrt(
        p.ICC_3 * p.omega_3 / p.K
        + p.ICC_2 * (1 - p.R2_2) / (_pq(p) * p.J * p.K)
        + (1 - p.ICC_2 - p.ICC_3) * (1 - p.R2_1) / (_pq(p) * p.J * p.K * p.nbar)
    )


def _se_m3rc2rc(p):
    return np.sqrt(
        p.ICC_3 * (1 - p.R2_3) / (_pq(p) * p.K)
        + p.ICC_2 * (1 - p.R2_2) / (_pq(p) * p.J * p.K)
        + (1 - p.ICC_2 - p.ICC_3) * (1 - p.R2_1) / (_pq(p) * p.J * p.K * p.nbar)
    )


# ---------------------------------------------------------------------------
# Degrees of freedom (value before flooring; shared across outcomes).

def _df_m1c(p):
    return p.nbar - p.numCovar_1 - 1


def _df_m2fc(p):
    return p.J * p.nbar - p.numCovar_1 - p.J - 1


def _df_m2ff(p):
    return p.J * p.nbar - p.numCovar_1 - 2 * p.J


def _df_m2r(p):
    return p.J - p.numCovar_1 - 1


def _df_m2rc(p):
    return p.J - p.numCovar_1 - 2


def _df_m3rr(p):
    return p.K - 1


def _df_m3ff2rc(p):
    return p.K * (p.J - 2) - p.numCovar_2


def _df_m3fc2rc(p):
    # One intercept per top-level unit, one treatment coefficient, level-2
    # covariates. Kept in its own function so the choice is swappable.
    return p.J * p.K - p.K - p.numCovar_2 - 1


def _df_m3rc2rc(p):
    return p.K - p.numCovar_3 - 2


# ---------------------------------------------------------------------------
# Closed-form sample-size inversions. r2 is (MT/MDES)^2; outcome index m.

def _infeasible_if(denominator: float) -> float:
    if denominator <= 0:
        raise InfeasibleDesignError(
            "infeasible: required variance reduction unattainable at any size"
        )
    return denominator


def _size_m1c(p, level, r2, m):
    return r2 * (1 - p.R2_1[m]) / _pq(p)


def _size_m2f(p, level, r2, m):
    num = (1 - p.ICC_2[m]) * (1 - p.R2_1[m])
    if level == "J":
        return r2 * num / (_pq(p) * p.nbar)
    return r2 * num / (_pq(p) * p.J)


def _size_m2r(p, level, r2, m):
    i2w2 = p.ICC_2[m] * p.omega_2[m]
    num = (1 - p.ICC_2[m]) * (1 - p.R2_1[m])
    if level == "J":
        return r2 * (i2w2 + num / (_pq(p) * p.nbar))
    denom = _infeasible_if(_pq(p) * (p.J / r2 - i2w2))
    return num / denom


def _size_m2rc(p, level, r2, m):
    a = p.ICC_2[m] * (1 - p.R2_2[m])
    num = (1 - p.ICC_2[m]) * (1 - p.R2_1[m])
    if level == "J":
        return r2 * (a + num / p.nbar) / _pq(p)
    denom = _infeasible_if(_pq(p) * p.J / r2 - a)
    return num / denom


def _size_m3rr2rr(p, level, r2, m):
    i3w3 = p.ICC_3[m] * p.omega_3[m]
    i2w2 = p.ICC_2[m] * p.omega_2[m]
    num = (1 - p.ICC_2[m] - p.ICC_3[m]) * (1 - p.R2_1[m])
    if level == "K":
        return r2 * (i3w3 + i2w2 / p.J + num / (_pq(p) * p.J * p.nbar))
    if level == "J":
        denom = _infeasible_if(_pq(p) * p.nbar * (p.K / r2 - i3w3))
        return (_pq(p) * p.nbar * i2w2 + num) / denom
    denom = _infeasible_if(_pq(p) * (p.J * p.K / r2 - p.J * i3w3 - i2w2))
    return num / denom


def _size_m3f2rc(p, level, r2, m):
    a = p.ICC_2[m] * (1 - p.R2_2[m])
    num = (1 - p.ICC_2[m] - p.ICC_3[m]) * (1 - p.R2_1[m])
    if level == "K":
        return r2 * (a + num / p.nbar) / (_pq(p) * p.J)
    if level == "J":
        return r2 * (a + num / p.nbar) / (_pq(p) * p.K)
    denom = _infeasible_if(_pq(p) * p.J * p.K / r2 - a)
    return num / denom


def _size_m3rr2rc(p, level, r2, m):
    i3w3 = p.ICC_3[m] * p.omega_3[m]
    a = p.ICC_2[m] * (1 - p.R2_2[m])
    num = (1 - p.ICC_2[m] - p.ICC_3[m]) * (1 - p.R2_1[m])
    if level == "K":
        return r2 * (i3w3 + (a + num / p.nbar) / (_pq(p) * p.J))
    if level == "J":
        denom = _infeasible_if(_pq(p) * (p.K / r2 - i3w3))
        return (a + num / p.nbar) / denom
    denom = _infeasible_if(_pq(p) * p.J * (p.K / r2 - i3w3) - a)
    return num / denom


def _size_m3rc2rc(p, level, r2, m):
    b = p.ICC_3[m] * (1 - p.R2_3[m])
    a = p.ICC_2[m] * (1 - p.R2_2[m])
    num = (1 - p.ICC_2[m] - p.ICC_3[m]) * (1 - p.R2_1[m])
    if level == "K":
        return r2 * (b + (a + num / p.nbar) / p.J) / _pq(p)
    if level == "J":
        denom = _infeasible_if(_pq(p) * p.K / r2 - b)
        return (a + num / p.nbar) / denom
    denom = _infeasible_if(p.J * (_pq(p) * p.K / r2 - b) - a)
    return num / denom


# ---------------------------------------------------------------------------
# Registry.

@dataclass(frozen=True)
class _Design:
    code: str
    levels: int
    rand_level: int
    powerup: str | None
    var_params: frozenset[str]
    se: Callable[[DesignParams], np.ndarray]
    df: Callable[[DesignParams], float]
    size: Callable[[DesignParams, str, float, int], float]


_REGISTRY: dict[str, _Design] = {
    d.code: d
    for d in [
        _Design("d1.1_m1c", 1, 1, None,
                frozenset({"R2.1"}), _se_m1c, _df_m1c, _size_m1c),
        _Design("d2.1_m2fc", 2, 1, "bira2_1c",
                frozenset({"R2.1", "ICC.2"}), _se_m2f, _df_m2fc, _size_m2f),
        _Design("d2.1_m2ff", 2, 1, "bira2_1f",
                frozenset({"R2.1", "ICC.2"}), _se_m2f, _df_m2ff, _size_m2f),
        _Design("d2.1_m2fr", 2, 1, "bira2_1r",
                frozenset({"R2.1", "ICC.2", "omega.2"}), _se_m2r, _df_m2r, _size_m2r),
        _Design("d2.1_m2rr", 2, 1, None,
                frozenset({"R2.1", "ICC.2", "omega.2"}), _se_m2r, _df_m2r, _size_m2r),
        _Design("d2.2_m2rc", 2, 2, "cra2_2r",
                frozenset({"R2.1", "R2.2", "ICC.2"}), _se_m2rc, _df_m2rc, _size_m2rc),
        _Design("d3.1_m3rr2rr", 3, 1, "bira3_1r",
                frozenset({"R2.1", "ICC.2", "omega.2", "ICC.3", "omega.3"}),
                _se_m3rr2rr, _df_m3rr, _size_m3rr2rr),
        _Design("d3.2_m3ff2rc", 3, 2, "bcra3_2f",
                frozenset({"R2.1", "R2.2", "ICC.2", "ICC.3"}),
                _se_m3f2rc, _df_m3ff2rc, _size_m3f2rc),
        _Design("d3.2_m3fc2rc", 3, 2, None,
                frozenset({"R2.1", "R2.2", "ICC.2", "ICC.3"}),
                _se_m3f2rc, _df_m3fc2rc, _size_m3f2rc),
        _Design("d3.2_m3rr2rc", 3, 2, "bcra3_2r",
                frozenset({"R2.1", "R2.2", "ICC.2", "ICC.3", "omega.3"}),
                _se_m3rr2rc, _df_m3rr, _size_m3rr2rc),
        _Design("d3.3_m3rc2rc", 3, 3, "cra3_3r",
                frozenset({"R2.1", "R2.2", "ICC.2", "R2.3", "ICC.3"}),
                _se_m3rc2rc, _df_m3rc2rc, _size_m3rc2rc),
    ]
}

DESIGNS: tuple[str, ...] = tuple(_REGISTRY)

_ALL_VAR_PARAMS = ("R2.1", "R2.2", "R2.3", "ICC.2", "ICC.3", "omega.2", "omega.3")


def _design(code: str) -> _Design:
    try:
        return _REGISTRY[code]
    except KeyError:
        raise DesignError(
            [f"unknown design {code!r}; valid codes: {', '.join(DESIGNS)}"]
        ) from None


def size_names(code: str) -> tuple[str, ...]:
    """Sample-size dimensions that exist for this design, bottom level first."""
    return ("nbar", "J", "K")[: _design(code).levels]


def top_level_size(code: str) -> str:
    return size_names(code)[-1]


def design_info() -> list[dict[str, Any]]:
    """Catalog listing: code, required parameters, external-tool equivalent."""
    out = []
    for d in _REGISTRY.values():
        params = ["nbar", "Tbar"]
        if d.levels >= 2:
            params.append("J")
        if d.levels >= 3:
            params.append("K")
        params += [f"numCovar.{i}" for i in range(1, d.levels + 1)]
        params += [k for k in _ALL_VAR_PARAMS if k in d.var_params]
        out.append(
            {
                "design": d.code,
                "levels": d.levels,
                "randomization_level": d.rand_level,
                "params": params,
                "powerup_name": d.powerup,
            }
        )
    return out


def with_size(p: DesignParams, level: str, value: float) -> DesignParams:
    if level not in ("nbar", "J", "K"):
        raise DesignError([f"unknown size dimension {level!r}"])
    return replace(p, **{level: value})


# ---------------------------------------------------------------------------
# Core operations.

def standard_errors(design: str, p: DesignParams) -> np.ndarray:
    """Vector of Q_m, the standard error of each estimated effect size."""
    return np.asarray(_design(design).se(p), dtype=float)


def standard_error(design: str, p: DesignParams, m: int = 0) -> float:
    return float(standard_errors(design, p)[m])


def degrees_of_freedom(design: str, p: DesignParams) -> int:
    """Shared df for the design's treatment-effect test. Must be >= 1."""
    d = _design(design)
    value = math.floor(d.df(p) + 1e-9)
    if value < 1:
        sizes = ", ".join(
            f"{name}={getattr(p, name):g}" for name in size_names(design)
        )
        covars = ", ".join(
            f"numCovar.{i}={getattr(p, f'numCovar_{i}')}" for i in range(1, d.levels + 1)
        )
        raise DesignError(
            [f"df = {value} < 1 for {design} ({sizes}, {covars})"]
        )
    return value


def mdes_multiplier(df: float, alpha: float, beta: float, two_sided: bool = True) -> float:
    """Sum of the two t quantiles linking MDES to Q: MDES = MT * Q.

    beta is the Type II error rate, so beta=0.2 targets 80% power.
    """
    errors = []
    if not 0 < alpha < 1:
        errors.append(f"alpha must be in (0,1), got {alpha}")
    if not 0 < beta < 1:
        errors.append(f"beta must be in (0,1), got {beta}")
    if df < 1:
        errors.append(f"df must be >= 1, got {df}")
    if errors:
        raise DesignError(errors)
    tail = alpha / 2 if two_sided else alpha
    return float(stats.t.ppf(1 - tail, df) + stats.t.ppf(1 - beta, df))


def closed_form_sample_size(
    design: str,
    p: DesignParams,
    mdes: float,
    mt: float,
    level: str,
    m: int = 0,
) -> float:
    """Real-valued size at `level` solving Q_m = mdes/mt.

    No rounding here; callers doing integer searches round themselves so
    brackets stay tight.
    """
    d = _design(design)
    if level not in size_names(design):
        raise DesignError([f"size dimension {level!r} does not exist for {design}"])
    if mdes <= 0:
        raise DesignError([f"MDES must be positive to invert, got {mdes}"])
    if mt <= 0:
        raise DesignError([f"MT must be positive, got {mt}"])
    value = d.size(p, level, (mt / mdes) ** 2, m)
    if not math.isfinite(value) or value <= 0:
        raise InfeasibleDesignError(
            "infeasible: required variance reduction unattainable at any size"
        )
    return float(value)


# ---------------------------------------------------------------------------
# Validation.

def _broadcast(value: Any, M: int, name: str, errors: list[str]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(M, float(arr[0]))
    elif arr.shape != (M,):
        errors.append(f"{name} must be a scalar or length-{M} vector, got shape {arr.shape}")
        arr = np.full(M, float(arr.flat[0]))
    return arr


def _check_range(
    arr: np.ndarray, name: str, errors: list[str],
    lo: float, hi: float | None, lo_open: bool = False, hi_open: bool = True,
) -> None:
    bad = ~np.isfinite(arr)
    bad |= (arr <= lo) if lo_open else (arr < lo)
    if hi is not None:
        bad |= (arr >= hi) if hi_open else (arr > hi)
    if bad.any():
        lo_b = "(" if lo_open else "["
        hi_b = ")" if hi_open else "]"
        hi_s = "inf" if hi is None else f"{hi:g}"
        errors.append(f"{name} must be in {lo_b}{lo:g},{hi_s}{hi_b}, got {arr[bad][0]:g}")


def validate(
    design: str,
    p: DesignParams,
    e: EffectSpec | None = None,
    power_definition: str | None = None,
) -> tuple[DesignParams, EffectSpec | None]:
    """Broadcast, range-check, and cross-check a request.

    Returns normalized copies with per-outcome fields as length-M float
    vectors. Raises DesignError listing every violation found.
    """
    d = _design(design)
    errors: list[str] = []

    M = p.M
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise DesignError([f"M must be a positive integer, got {M!r}"])

    if not (np.isfinite(p.Tbar) and 0 < p.Tbar < 1):
        errors.append("Tbar must be in (0,1)")
    if not (np.isfinite(p.alpha) and 0 < p.alpha < 1):
        errors.append(f"alpha must be in (0,1), got {p.alpha}")

    size_ok = True
    if not (p.nbar is not None and np.isfinite(p.nbar) and p.nbar > 0):
        errors.append(f"nbar must be positive, got {p.nbar}")
        size_ok = False
    for name, level in (("J", 2), ("K", 3)):
        value = getattr(p, name)
        if d.levels >= level:
            if value is None or not (np.isfinite(value) and value >= 1):
                errors.append(f"{name} must be >= 1 for {design}, got {value}")
                size_ok = False
        elif value is not None:
            errors.append(f"{name} is not a parameter of {design}")
    for i in (1, 2, 3):
        g = getattr(p, f"numCovar_{i}")
        if not (isinstance(g, (int, np.integer)) and g >= 0):
            errors.append(f"numCovar.{i} must be a non-negative integer, got {g!r}")
            size_ok = False
        elif i > d.levels and g != 0:
            errors.append(f"numCovar.{i} is not a parameter of {design}")

    vectors: dict[str, np.ndarray] = {}
    for key in _ALL_VAR_PARAMS:
        fname = DESIGN_PARAM_KEYS[key]
        vectors[fname] = _broadcast(getattr(p, fname), M, key, errors)
    for key in ("R2.1", "R2.2", "R2.3", "ICC.2", "ICC.3"):
        _check_range(vectors[DESIGN_PARAM_KEYS[key]], key, errors, 0.0, 1.0)
    for key in ("omega.2", "omega.3"):
        _check_range(vectors[DESIGN_PARAM_KEYS[key]], key, errors, 0.0, None)
    if np.any(vectors["ICC_2"] + vectors["ICC_3"] >= 1):
        errors.append("ICC sum >= 1: ICC.2 + ICC.3 must be < 1 for every outcome")
    for key in _ALL_VAR_PARAMS:
        if key not in d.var_params and np.any(vectors[DESIGN_PARAM_KEYS[key]] != 0):
            errors.append(f"{key} is not a parameter of {design}")

    norm_p = replace(p, **vectors)

    norm_e: EffectSpec | None = None
    if e is not None:
        numZero = e.numZero
        if not (isinstance(numZero, (int, np.integer)) and 0 <= numZero <= M):
            errors.append(f"numZero must be an integer in [0,{M}], got {numZero!r}")
            numZero = 0
        mdes_in = np.atleast_1d(np.asarray(e.MDES, dtype=float))
        if mdes_in.size == 1:
            mdes = np.full(M, float(mdes_in[0]))
            if numZero:
                mdes[M - numZero:] = 0.0
        elif mdes_in.shape == (M,):
            mdes = mdes_in.astype(float).copy()
            if numZero and np.any(mdes[M - numZero:] != 0):
                errors.append(
                    f"the last numZero={numZero} MDES entries must be zero"
                )
        else:
            errors.append(f"MDES must be a scalar or length-{M} vector, got shape {mdes_in.shape}")
            mdes = np.zeros(M)
        if np.any(~np.isfinite(mdes)) or np.any(mdes < 0):
            errors.append("MDES entries must be finite and >= 0")
        norm_e = EffectSpec(MDES=mdes, numZero=int(numZero))
        if power_definition == "complete" and numZero > 0:
            errors.append("complete power is undefined when numZero > 0")

    if errors:
        raise DesignError(errors)

    # Feasibility checks need clean inputs, hence after the raise above.
    degrees_of_freedom(design, norm_p)
    q = standard_errors(design, norm_p)
    if np.any(~np.isfinite(q)) or np.any(q <= 0):
        raise DesignError([f"standard error is not positive for {design}"])
    return norm_p, norm_e
