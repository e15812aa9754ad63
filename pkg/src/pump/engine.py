"""Monte Carlo power estimation.

Pipeline: sample correlated test statistics under the joint alternative,
convert to raw p-values, adjust per procedure, threshold at alpha, and
tabulate every power definition with its Monte Carlo standard error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

from . import designs
from .designs import DesignError, DesignParams, EffectSpec
from .mtp import (
    MTPS,
    MtpError,
    NullStatisticSource,
    adjust_matrix,
    draw_null_pvalues,
    needs_nulls,
    warn_if_b_too_small,
)
from .sampling import normalize_rho, psd_factor, pvalues, sample_t_rows
from .seeding import ALT_STREAM, DEFAULT_SEED

DEFAULT_TNUM = 10_000
DEFAULT_B = 1000


@dataclass(frozen=True, eq=False)
class AlternativeSpec:
    """Joint alternative for the test-statistic sampler."""

    shift: np.ndarray
    df: float
    rho: np.ndarray
    tnum: int
    seed: int = DEFAULT_SEED


@dataclass(frozen=True, eq=False)
class PowerRequest:
    """One complete power question."""

    design: str
    params: DesignParams
    effects: EffectSpec
    mtps: tuple[str, ...] = ("None",)
    rho: Any = 0.0
    tnum: int = DEFAULT_TNUM
    B: int = DEFAULT_B


@dataclass(frozen=True, eq=False)
class PowerRow:
    mtp: str
    power: dict[str, float]
    mc_se: dict[str, float]


@dataclass(frozen=True, eq=False)
class PowerTable:
    design: str
    M: int
    tnum: int
    B: int | None
    seed: int
    df: int
    Q: np.ndarray
    shift: np.ndarray
    rows: tuple[PowerRow, ...]

    def row(self, mtp: str) -> PowerRow:
        for row in self.rows:
            if row.mtp == mtp:
                return row
        raise KeyError(f"no row for MTP {mtp!r}")

    def cell(self, mtp: str, definition: str) -> tuple[float, float]:
        row = self.row(mtp)
        if definition not in row.power:
            raise KeyError(
                f"definition {definition!r} not reported for MTP {mtp!r}; "
                f"available: {', '.join(row.power)}"
            )
        return row.power[definition], row.mc_se[definition]

    def to_records(self) -> list[dict[str, Any]]:
        out = []
        for row in self.rows:
            for definition, value in row.power.items():
                out.append(
                    {
                        "MTP": row.mtp,
                        "definition": definition,
                        "value": value,
                        "mc_se": row.mc_se[definition],
                    }
                )
        return out


_DEFINITION_RE = re.compile(r"^(D(?P<m>[1-9]\d*)indiv|min(?P<d>[1-9]\d*)|mean|complete)$")


def check_definition(definition: str, M: int) -> None:
    """Reject malformed or out-of-range power-definition labels."""
    match = _DEFINITION_RE.match(definition)
    if not match:
        raise DesignError(
            [f"unknown power definition {definition!r}; "
             f"expected D<m>indiv, min<d>, mean, or complete"]
        )
    m = match.group("m")
    if m is not None and not 1 <= int(m) <= M:
        raise DesignError([f"{definition!r} out of range for M={M}"])
    d = match.group("d")
    if d is not None and not 1 <= int(d) <= max(M - 1, 1):
        raise DesignError([f"{definition!r} out of range for M={M}"])


def sample_alternative(spec: AlternativeSpec) -> np.ndarray:
    """tnum x M matrix of correlated t statistics under the alternative."""
    shift = np.asarray(spec.shift, dtype=float)
    M = shift.shape[0]
    rho = normalize_rho(spec.rho, M)
    if spec.tnum < 1:
        raise DesignError([f"tnum must be >= 1, got {spec.tnum}"])
    if spec.df < 1:
        raise DesignError([f"df must be >= 1, got {spec.df}"])
    return sample_t_rows(shift, spec.df, psd_factor(rho), spec.tnum, spec.seed, ALT_STREAM)


def raw_pvalues(E: np.ndarray, df: float, two_sided: bool = True) -> np.ndarray:
    return pvalues(E, df, two_sided)


def rejections(G: np.ndarray, alpha: float) -> np.ndarray:
    """Strict comparison: p equal to alpha is not a rejection."""
    return np.asarray(G) < alpha


def summarize(
    H_adj: np.ndarray,
    H_raw: np.ndarray,
    mtp: str,
    numZero: int = 0,
) -> tuple[dict[str, float], dict[str, float]]:
    """Power definitions for one procedure's rejection indicators.

    Individual and mean-individual power always; d-minimal and complete only
    for multi-outcome rows with an adjusting procedure. complete is computed
    from the raw indicators (the intersection-union test needs no
    adjustment) and is undefined when effects are zeroed.
    """
    H_adj = np.asarray(H_adj, dtype=bool)
    tnum, M = H_adj.shape
    indiv = H_adj.mean(axis=0)
    power: dict[str, float] = {f"D{m + 1}indiv": float(indiv[m]) for m in range(M)}
    power["mean"] = float(indiv.mean())
    if M > 1 and mtp != "None":
        rowsums = H_adj.sum(axis=1)
        for d in range(1, M):
            power[f"min{d}"] = float(np.mean(rowsums >= d))
        if numZero == 0:
            power["complete"] = float(np.mean(np.asarray(H_raw, dtype=bool).all(axis=1)))
    mc_se = {k: float(np.sqrt(v * (1.0 - v) / tnum)) for k, v in power.items()}
    return power, mc_se


def noncentral_t_power(shift: float, df: float, alpha: float, two_sided: bool = True) -> float:
    """Closed-form single-test rejection probability, for cross-checking."""
    if two_sided:
        crit = stats.t.ppf(1 - alpha / 2, df)
        return float(stats.nct.sf(crit, df, shift) + stats.nct.cdf(-crit, df, shift))
    crit = stats.t.ppf(1 - alpha, df)
    return float(stats.nct.sf(crit, df, shift))


def resolve(req: PowerRequest) -> tuple[DesignParams, EffectSpec, np.ndarray, np.ndarray, int]:
    """Validate a request and derive (params, effects, rho, Q, df)."""
    if not req.mtps:
        raise MtpError("at least one MTP is required")
    for mtp in req.mtps:
        if mtp not in MTPS:
            raise MtpError(f"unknown MTP {mtp!r}; valid codes: {', '.join(MTPS)}")
    if len(set(req.mtps)) != len(req.mtps):
        raise MtpError("duplicate MTP codes in request")
    params, effects = designs.validate(req.design, req.params, req.effects)
    rho = normalize_rho(req.rho, params.M)
    psd_factor(rho)
    if req.tnum < 1:
        raise DesignError([f"tnum must be >= 1, got {req.tnum}"])
    if req.B < 1:
        raise DesignError([f"B must be >= 1, got {req.B}"])
    Q = designs.standard_errors(req.design, params)
    df = designs.degrees_of_freedom(req.design, params)
    return params, effects, rho, Q, df


def pump_power(req: PowerRequest, seed: int | None = None) -> PowerTable:
    """Estimate every applicable power definition for each requested MTP."""
    seed = DEFAULT_SEED if seed is None else int(seed)
    params, effects, rho, Q, df = resolve(req)
    shift = effects.MDES / Q
    spec = AlternativeSpec(shift=shift, df=df, rho=rho, tnum=req.tnum, seed=seed)
    E = sample_alternative(spec)
    F = raw_pvalues(E, df, params.two_sided)
    H_raw = rejections(F, params.alpha)

    null_p = None
    used_b = None
    if any(needs_nulls(mtp) for mtp in req.mtps):
        warn_if_b_too_small(req.B, params.alpha)
        used_b = req.B
        null_p = draw_null_pvalues(
            NullStatisticSource(
                df=df, rho=rho, M=params.M, B=req.B, seed=seed,
                two_sided=params.two_sided,
            )
        )

    rows = []
    for mtp in req.mtps:
        G = adjust_matrix(mtp, F, null_p)
        H = rejections(G, params.alpha)
        power, mc_se = summarize(H, H_raw, mtp, effects.numZero)
        rows.append(PowerRow(mtp=mtp, power=power, mc_se=mc_se))

    return PowerTable(
        design=req.design,
        M=params.M,
        tnum=req.tnum,
        B=used_b,
        seed=seed,
        df=df,
        Q=Q,
        shift=shift,
        rows=tuple(rows),
    )
