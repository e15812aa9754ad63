"""Design-based estimators applied to generated datasets.

For each supported design this module fits the matching analysis model
with ordinary least squares (plus aggregation for random-effect layers),
producing one t statistic per outcome. Repeating that over many
generated datasets yields a simulation estimate of power that shares no
code with the test-statistic sampler, so the two can be compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import designs
from .designs import DesignError, DesignParams
from .dgp import (
    DgpControlParams,
    GeneratedDataset,
    assign_treatment,
    generate_dataset,
    solve_model_params,
)
from .engine import PowerRow, rejections, summarize
from .mtp import MTPS, MtpError, NullStatisticSource, adjust_matrix, draw_null_pvalues, needs_nulls
from .sampling import pvalues
from .seeding import DEFAULT_SEED, DGP_STREAM, stream

_ITER_SUB = 2

_SCHEME_BY_SHAPE = {
    (1, 1): "simple",
    (2, 1): "blocked-individual",
    (2, 2): "cluster-2",
    (3, 1): "blocked-individual",
    (3, 2): "blocked-cluster-2",
    (3, 3): "cluster-3",
}

_DESIGN_SHAPE = {
    row["design"]: (row["levels"], row["randomization_level"])
    for row in designs.design_info()
}


def scheme_for(design: str) -> str:
    """Randomization scheme implied by the design's levels."""
    try:
        shape = _DESIGN_SHAPE[design]
    except KeyError:
        raise DesignError(
            [f"unknown design {design!r}; valid codes: {', '.join(designs.DESIGNS)}"]
        ) from None
    return _SCHEME_BY_SHAPE[shape]


# ---------------------------------------------------------------------------
# Regression helpers.

def _ols(y: np.ndarray, Z: np.ndarray, dof: int | None = None):
    """Coefficients, their covariance, and the residual dof used for s^2."""
    beta, _, _, _ = np.linalg.lstsq(Z, y, rcond=None)
    resid = y - Z @ beta
    if dof is None:
        dof = Z.shape[0] - Z.shape[1]
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(Z.T @ Z)
    return beta, cov, dof


def _t_for_coef(y: np.ndarray, Z: np.ndarray, coef: int, dof: int | None = None) -> float:
    beta, cov, _ = _ols(y, Z, dof)
    return float(beta[coef] / np.sqrt(cov[coef, coef]))


def _t_for_mean_of(y: np.ndarray, Z: np.ndarray, coefs: slice, dof: int | None = None) -> float:
    beta, cov, _ = _ols(y, Z, dof)
    a = np.zeros(Z.shape[1])
    a[coefs] = 1.0 / (coefs.stop - coefs.start)
    return float(a @ beta / np.sqrt(a @ cov @ a))


def _one_sample_t(values: np.ndarray) -> float:
    n = values.shape[0]
    return float(values.mean() / np.sqrt(values.var(ddof=1) / n))


def _within_school_gamma(Yobs: np.ndarray, C: np.ndarray, m: int) -> float:
    """Pooled within-school slope of the individual covariate.

    Treatment, school effects, and impacts are constant within a school
    whenever clusters are randomized, so this regression is unconfounded.
    """
    y = Yobs[..., m]
    c = C[..., m]
    yt = y - y.mean(axis=2, keepdims=True)
    ct = c - c.mean(axis=2, keepdims=True)
    return float((ct * yt).sum() / (ct * ct).sum())


def _adjusted_school_means(ds: GeneratedDataset, Yobs: np.ndarray, m: int) -> np.ndarray:
    gamma_hat = _within_school_gamma(Yobs, ds.C, m)
    return Yobs[..., m].mean(axis=2) - gamma_hat * ds.C[..., m].mean(axis=2)


def _pooled_covariate_slope(y: np.ndarray, t: np.ndarray, c: np.ndarray) -> float:
    """Covariate coefficient pooled across groups, controlling treatment.

    y, t, c have shape (groups, size); group means are removed and the
    covariate slope comes from the joint fit on the demeaned columns.
    Pooling keeps the coefficient's noise negligible next to any single
    group's, matching analyses that share one slope across groups.
    """
    yt = (y - y.mean(axis=1, keepdims=True)).reshape(-1)
    tt = (t - t.mean(axis=1, keepdims=True)).reshape(-1)
    ct = (c - c.mean(axis=1, keepdims=True)).reshape(-1)
    Z = np.column_stack([tt, ct])
    beta, _, _, _ = np.linalg.lstsq(Z, yt, rcond=None)
    return float(beta[1])


def _per_group_diffs(y: np.ndarray, t: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Treatment-control mean difference per group, after removing the
    pooled covariate slope. y, t, c have shape (groups, size)."""
    y2 = y - _pooled_covariate_slope(y, t, c) * c
    treated = (y2 * t).sum(axis=1) / t.sum(axis=1)
    control = (y2 * (1 - t)).sum(axis=1) / (1 - t).sum(axis=1)
    return treated - control


def _school_dummies(n_groups: int, group_size: int) -> np.ndarray:
    return np.kron(np.eye(n_groups), np.ones((group_size, 1)))


# ---------------------------------------------------------------------------
# Estimators: one t statistic per outcome.

def _est_m1c(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    T = ds.T.reshape(-1)
    out = np.empty(ds.M)
    for m in range(ds.M):
        Z = np.column_stack([np.ones(T.shape[0]), T, ds.C[..., m].reshape(-1)])
        out[m] = _t_for_coef(Yobs[..., m].reshape(-1), Z, 1)
    return out


def _est_m2fc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    schools = ds.K * ds.J
    n = ds.nbar
    T = ds.T.reshape(schools, n)
    Tt = T - T.mean(axis=1, keepdims=True)
    out = np.empty(ds.M)
    for m in range(ds.M):
        y = Yobs[..., m].reshape(schools, n)
        c = ds.C[..., m].reshape(schools, n)
        yt = (y - y.mean(axis=1, keepdims=True)).reshape(-1)
        ct = (c - c.mean(axis=1, keepdims=True)).reshape(-1)
        Z = np.column_stack([Tt.reshape(-1), ct])
        out[m] = _t_for_coef(yt, Z, 0, dof=schools * n - schools - 2)
    return out


def _est_m2ff(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    schools = ds.K * ds.J
    n = ds.nbar
    D = _school_dummies(schools, n)
    T = ds.T.reshape(-1)
    out = np.empty(ds.M)
    for m in range(ds.M):
        Z = np.column_stack([D, D * T[:, None], ds.C[..., m].reshape(-1)])
        out[m] = _t_for_mean_of(
            Yobs[..., m].reshape(-1), Z, slice(schools, 2 * schools)
        )
    return out


def _est_m2r(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    schools = ds.K * ds.J
    n = ds.nbar
    T = ds.T.reshape(schools, n)
    out = np.empty(ds.M)
    for m in range(ds.M):
        diffs = _per_group_diffs(
            Yobs[..., m].reshape(schools, n), T, ds.C[..., m].reshape(schools, n)
        )
        out[m] = _one_sample_t(diffs)
    return out


def _est_m2rc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    schools = ds.K * ds.J
    T = ds.T.reshape(schools, -1)[:, 0]
    out = np.empty(ds.M)
    for m in range(ds.M):
        A = _adjusted_school_means(ds, Yobs, m).reshape(schools)
        Z = np.column_stack([np.ones(schools), T, ds.X[..., m].reshape(schools)])
        out[m] = _t_for_coef(A, Z, 1)
    return out


def _est_m3rr2rr(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    out = np.empty(ds.M)
    for m in range(ds.M):
        diffs = _per_group_diffs(
            Yobs[..., m].reshape(ds.K * ds.J, ds.nbar),
            ds.T.reshape(ds.K * ds.J, ds.nbar),
            ds.C[..., m].reshape(ds.K * ds.J, ds.nbar),
        ).reshape(ds.K, ds.J)
        out[m] = _one_sample_t(diffs.mean(axis=1))
    return out


def _est_m3ff2rc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    D = _school_dummies(ds.K, ds.J)
    T = ds.T[:, :, 0].reshape(-1)
    out = np.empty(ds.M)
    for m in range(ds.M):
        A = _adjusted_school_means(ds, Yobs, m).reshape(-1)
        Z = np.column_stack([D, D * T[:, None], ds.X[..., m].reshape(-1)])
        out[m] = _t_for_mean_of(A, Z, slice(ds.K, 2 * ds.K))
    return out


def _est_m3fc2rc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    D = _school_dummies(ds.K, ds.J)
    T = ds.T[:, :, 0].reshape(-1)
    out = np.empty(ds.M)
    for m in range(ds.M):
        A = _adjusted_school_means(ds, Yobs, m).reshape(-1)
        Z = np.column_stack([D, T, ds.X[..., m].reshape(-1)])
        out[m] = _t_for_coef(A, Z, ds.K)
    return out


def _est_m3rr2rc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    T = ds.T[:, :, 0]
    out = np.empty(ds.M)
    for m in range(ds.M):
        A = _adjusted_school_means(ds, Yobs, m)
        out[m] = _one_sample_t(_per_group_diffs(A, T, ds.X[..., m]))
    return out


def _est_m3rc2rc(ds: GeneratedDataset, Yobs: np.ndarray) -> np.ndarray:
    T = ds.T[:, 0, 0]
    out = np.empty(ds.M)
    for m in range(ds.M):
        A = _adjusted_school_means(ds, Yobs, m)
        x = ds.X[..., m]
        At = A - A.mean(axis=1, keepdims=True)
        xt = x - x.mean(axis=1, keepdims=True)
        delta_hat = float((xt * At).sum() / (xt * xt).sum())
        district = A.mean(axis=1) - delta_hat * x.mean(axis=1)
        Z = np.column_stack([np.ones(ds.K), T, ds.V[..., m]])
        out[m] = _t_for_coef(district, Z, 1)
    return out


ESTIMATORS = {
    "d1.1_m1c": _est_m1c,
    "d2.1_m2fc": _est_m2fc,
    "d2.1_m2ff": _est_m2ff,
    "d2.1_m2fr": _est_m2r,
    "d2.1_m2rr": _est_m2r,
    "d2.2_m2rc": _est_m2rc,
    "d3.1_m3rr2rr": _est_m3rr2rr,
    "d3.2_m3ff2rc": _est_m3ff2rc,
    "d3.2_m3fc2rc": _est_m3fc2rc,
    "d3.2_m3rr2rc": _est_m3rr2rc,
    "d3.3_m3rc2rc": _est_m3rc2rc,
}


def estimate_tstats(design: str, ds: GeneratedDataset) -> np.ndarray:
    if design not in ESTIMATORS:
        raise DesignError(
            [f"unknown design {design!r}; valid codes: {', '.join(designs.DESIGNS)}"]
        )
    if ds.T is None:
        raise DesignError(["treatment has not been assigned"])
    return ESTIMATORS[design](ds, ds.observed())


# ---------------------------------------------------------------------------
# Simulation loop.

@dataclass(frozen=True, eq=False)
class OracleEstimate:
    """Simulated power per procedure with a conservative binomial CI."""

    design: str
    S: int
    df: int
    ci_halfwidth: float
    rows: tuple[PowerRow, ...]
    pvalues: np.ndarray

    def row(self, mtp: str) -> PowerRow:
        for row in self.rows:
            if row.mtp == mtp:
                return row
        raise KeyError(f"no row for MTP {mtp!r}")


def _design_params(design: str, c: DgpControlParams, alpha: float, two_sided: bool) -> DesignParams:
    levels = _DESIGN_SHAPE[design][0]
    return DesignParams(
        M=c.M,
        nbar=c.nbar,
        Tbar=c.Tbar,
        J=c.J if levels >= 2 else None,
        K=c.K if levels >= 3 else None,
        numCovar_1=1,
        numCovar_2=1 if levels >= 2 else 0,
        numCovar_3=1 if levels >= 3 else 0,
        alpha=alpha,
        two_sided=two_sided,
    )


def _iteration_seed(seed: int, s: int) -> int:
    return int(stream(seed, DGP_STREAM, _ITER_SUB, s).integers(0, 2**63 - 1))


def oracle_power(
    design: str,
    controls: DgpControlParams,
    mtps: tuple[str, ...] = ("None",),
    S: int = 1000,
    alpha: float = 0.05,
    two_sided: bool = True,
    B: int = 1000,
    seed: int | None = None,
) -> OracleEstimate:
    """Power by repeated generation, assignment, and model fitting.

    The reported interval halfwidth 1.96 * sqrt(0.25 / S) bounds the
    binomial error of any power estimate at this replication count.
    """
    seed = DEFAULT_SEED if seed is None else int(seed)
    if S < 2:
        raise DesignError([f"S must be >= 2, got {S}"])
    for mtp in mtps:
        if mtp not in MTPS:
            raise MtpError(f"unknown MTP {mtp!r}; valid codes: {', '.join(MTPS)}")
    scheme = scheme_for(design)
    mp = solve_model_params(controls)
    p = _design_params(design, controls, alpha, two_sided)
    df = designs.degrees_of_freedom(design, p)

    F = np.empty((S, controls.M))
    for s in range(S):
        child = _iteration_seed(seed, s)
        ds = generate_dataset(mp, controls, child)
        T = assign_treatment(scheme, controls.K, controls.J, controls.nbar,
                             controls.Tbar, child)
        F[s] = estimate_tstats(design, ds.with_assignment(T))
    F = pvalues(F, df, two_sided)

    H_raw = rejections(F, alpha)
    numZero = int(np.sum(np.atleast_1d(np.asarray(controls.ES, dtype=float)) == 0))
    null_p = None
    if any(needs_nulls(mtp) for mtp in mtps):
        null_p = draw_null_pvalues(
            NullStatisticSource(
                df=df, rho=controls.rho, M=controls.M, B=B, seed=seed,
                two_sided=two_sided,
            )
        )
    rows = []
    for mtp in mtps:
        adj = adjust_matrix(mtp, F, nulls=null_p)
        power, mc_se = summarize(rejections(adj, alpha), H_raw, mtp, numZero)
        rows.append(PowerRow(mtp=mtp, power=power, mc_se=mc_se))
    return OracleEstimate(
        design=design,
        S=S,
        df=df,
        ci_halfwidth=float(1.96 * np.sqrt(0.25 / S)),
        rows=tuple(rows),
        pvalues=F,
    )
