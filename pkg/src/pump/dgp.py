"""Multilevel potential-outcome generator and its parameter algebra.

Control parameters (ICC, omega, R2, effect sizes, correlation matrices)
are translated into model coefficients and variance components, then a
three-level dataset of potential outcomes is drawn layer by layer.
Treatment assignment schemes and plug-in moment recovery live here too;
the estimators that consume the generated data are in oracle.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

from .designs import DesignError
from .sampling import normalize_rho
from .seeding import DEFAULT_SEED, DGP_STREAM, stream

_GEN_SUB = 0
_ASSIGN_SUB = 1

SCHEMES = (
    "simple",
    "blocked-individual",
    "cluster-2",
    "blocked-cluster-2",
    "cluster-3",
)


@dataclass(frozen=True, eq=False)
class DgpControlParams:
    """User-facing knobs: variance ratios, effect sizes, correlations.

    `rho` fills every correlation matrix; per-matrix overrides win when
    given. kappa matrices (intercept-impact correlations) default to 0
    and need not be symmetric.
    """

    M: int
    nbar: int
    J: int = 1
    K: int = 1
    Tbar: float = 0.5
    ES: Any = 0.0
    ICC_2: Any = 0.0
    ICC_3: Any = 0.0
    omega_2: Any = 0.0
    omega_3: Any = 0.0
    R2_1: Any = 0.0
    R2_2: Any = 0.0
    R2_3: Any = 0.0
    rho: Any = 0.0
    rho_V: Any = None
    rho_X: Any = None
    rho_C: Any = None
    rho_w0: Any = None
    rho_w1: Any = None
    rho_u0: Any = None
    rho_u1: Any = None
    rho_r: Any = None
    kappa_w: Any = 0.0
    kappa_u: Any = 0.0


@dataclass(frozen=True, eq=False)
class DgpModelParams:
    """Per-outcome coefficients and variance components, sigma^2 fixed at 1."""

    M: int
    gamma: np.ndarray
    delta: np.ndarray
    xi: np.ndarray
    tau0sq: np.ndarray
    tau1sq: np.ndarray
    eta0sq: np.ndarray
    eta1sq: np.ndarray
    Xi1: np.ndarray
    sigma2: np.ndarray = field(default=None)  # type: ignore[assignment]
    Xi0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.sigma2 is None:
            object.__setattr__(self, "sigma2", np.ones(self.M))
        if self.Xi0 is None:
            object.__setattr__(self, "Xi0", np.zeros(self.M))

    def total_variance(self) -> np.ndarray:
        return (
            self.xi**2 + self.eta0sq + self.delta**2 + self.tau0sq
            + self.gamma**2 + self.sigma2
        )


@dataclass(frozen=True, eq=False)
class GeneratedDataset:
    """Potential outcomes with every latent layer retained.

    District arrays are (K, M), school arrays (K, J, M), individual
    arrays (K, J, nbar, M). T is (K, J, nbar) once assigned.
    """

    M: int
    K: int
    J: int
    nbar: int
    V: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    X: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    theta0: np.ndarray
    psi1: np.ndarray
    C: np.ndarray
    r: np.ndarray
    Y0: np.ndarray
    Y1: np.ndarray
    T: np.ndarray | None = None

    def with_assignment(self, T: np.ndarray) -> "GeneratedDataset":
        T = np.asarray(T)
        if T.shape != (self.K, self.J, self.nbar):
            raise DesignError(
                [f"T must have shape {(self.K, self.J, self.nbar)}, got {T.shape}"]
            )
        return GeneratedDataset(
            M=self.M, K=self.K, J=self.J, nbar=self.nbar,
            V=self.V, w0=self.w0, w1=self.w1, mu0=self.mu0, mu1=self.mu1,
            X=self.X, u0=self.u0, u1=self.u1, theta0=self.theta0, psi1=self.psi1,
            C=self.C, r=self.r, Y0=self.Y0, Y1=self.Y1, T=T,
        )

    def observed(self) -> np.ndarray:
        if self.T is None:
            raise DesignError(["treatment has not been assigned"])
        T = self.T[..., None]
        return self.Y0 * (1 - T) + self.Y1 * T

    def to_frame(self) -> pd.DataFrame:
        K, J, n, M = self.K, self.J, self.nbar, self.M
        k_id = np.repeat(np.arange(1, K + 1), J * n)
        j_id = np.tile(np.repeat(np.arange(1, J + 1), n), K)
        i_id = np.tile(np.arange(1, n + 1), K * J)
        data: dict[str, np.ndarray] = {
            "K.id": k_id, "J.id": j_id, "i": i_id,
        }
        data["T"] = (
            self.T.reshape(-1).astype(int)
            if self.T is not None
            else np.zeros(K * J * n, dtype=int)
        )
        yobs = (
            self.observed() if self.T is not None else self.Y0
        ).reshape(-1, M)
        v_rows = np.repeat(self.V, J * n, axis=0)
        x_rows = np.repeat(self.X.reshape(K * J, M), n, axis=0)
        for m in range(M):
            s = m + 1
            data[f"V{s}"] = v_rows[:, m]
            data[f"X{s}"] = x_rows[:, m]
            data[f"C{s}"] = self.C.reshape(-1, M)[:, m]
            data[f"Y0.{s}"] = self.Y0.reshape(-1, M)[:, m]
            data[f"Y1.{s}"] = self.Y1.reshape(-1, M)[:, m]
            data[f"Yobs.{s}"] = yobs[:, m]
        return pd.DataFrame(data)


@dataclass(frozen=True, eq=False)
class MomentEstimates:
    """Plug-in control-parameter estimates; `defined` flags 0/0 ratios."""

    values: dict[str, np.ndarray]
    defined: dict[str, np.ndarray]


# ---------------------------------------------------------------------------
# Parameter translation.

def _control_vector(value: Any, M: int, name: str, errors: list[str]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(M, float(arr[0]))
    elif arr.shape != (M,):
        errors.append(f"{name} must be a scalar or length-{M} vector")
        arr = np.zeros(M)
    if np.any(~np.isfinite(arr)):
        errors.append(f"{name} entries must be finite")
        arr = np.nan_to_num(arr)
    return arr


def _control_vectors(c: DgpControlParams) -> dict[str, np.ndarray]:
    errors: list[str] = []
    if not (isinstance(c.M, (int, np.integer)) and c.M >= 1):
        raise DesignError([f"M must be a positive integer, got {c.M!r}"])
    for name in ("K", "J", "nbar"):
        value = getattr(c, name)
        if not (isinstance(value, (int, np.integer)) and value >= 1):
            errors.append(f"{name} must be a positive integer, got {value!r}")
    if not 0 < c.Tbar < 1:
        errors.append("Tbar must be in (0,1)")
    out = {
        name: _control_vector(getattr(c, name), c.M, name, errors)
        for name in ("ES", "ICC_2", "ICC_3", "omega_2", "omega_3", "R2_1", "R2_2", "R2_3")
    }
    for name in ("R2_1", "R2_2", "R2_3"):
        if np.any((out[name] < 0) | (out[name] >= 1)):
            errors.append(f"{name.replace('_', '.')} must be in [0,1)")
    for name in ("ICC_2", "ICC_3"):
        if np.any(out[name] < 0):
            errors.append(f"{name.replace('_', '.')} must be >= 0")
    for name in ("omega_2", "omega_3"):
        if np.any(out[name] < 0):
            errors.append(f"{name.replace('_', '.')} must be >= 0")
    if np.any(out["ICC_2"] + out["ICC_3"] >= 1):
        errors.append("ICC.2 + ICC.3 must be < 1 for every outcome")
    if errors:
        raise DesignError(errors)
    return out


def _kappa_matrix(value: Any, M: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((M, M), float(arr))
    if arr.shape != (M, M):
        raise DesignError([f"{name} must be a scalar or {M}x{M} matrix"])
    if np.any(np.abs(arr) > 1) or np.any(~np.isfinite(arr)):
        raise DesignError([f"{name} entries must be correlations in [-1,1]"])
    return arr


def _correlation_matrices(c: DgpControlParams) -> dict[str, np.ndarray]:
    out = {}
    for name in ("rho_V", "rho_X", "rho_C", "rho_w0", "rho_w1", "rho_u0", "rho_u1", "rho_r"):
        override = getattr(c, name)
        source = c.rho if override is None else override
        out[name] = normalize_rho(source, c.M)
    out["kappa_w"] = _kappa_matrix(c.kappa_w, c.M, "kappa_w")
    out["kappa_u"] = _kappa_matrix(c.kappa_u, c.M, "kappa_u")
    return out


def solve_model_params(c: DgpControlParams) -> DgpModelParams:
    """Translate variance-ratio controls into coefficients and components.

    sigma^2 is normalized to 1 and the control grand mean to 0, making
    the total control-outcome variance 1/((1-R2.1)(1-ICC.2-ICC.3)).
    """
    v = _control_vectors(c)
    icc2, icc3 = v["ICC_2"], v["ICC_3"]
    r21, r22, r23 = v["R2_1"], v["R2_2"], v["R2_3"]
    level_share = 1.0 - icc2 - icc3

    gamma_sq = r21 / (1.0 - r21)
    delta_sq = (r22 / (1.0 - r21)) * (icc2 / level_share)
    xi_sq = (r23 / (1.0 - r21)) * (icc3 / level_share)
    tau0sq = ((1.0 - r22) / (1.0 - r21)) * (icc2 / level_share)
    eta0sq = ((1.0 - r23) / (1.0 - r21)) * (icc3 / level_share)
    eta1sq = v["omega_3"] * (eta0sq + xi_sq)
    tau1sq = v["omega_2"] * (tau0sq + delta_sq)
    sd_total = np.sqrt(xi_sq + eta0sq + delta_sq + tau0sq + gamma_sq + 1.0)

    return DgpModelParams(
        M=c.M,
        gamma=np.sqrt(gamma_sq),
        delta=np.sqrt(delta_sq),
        xi=np.sqrt(xi_sq),
        tau0sq=tau0sq,
        tau1sq=tau1sq,
        eta0sq=eta0sq,
        eta1sq=eta1sq,
        Xi1=v["ES"] * sd_total,
    )


def recovered_controls(mp: DgpModelParams) -> MomentEstimates:
    """Apply the defining variance ratios to model components.

    Inverse of solve_model_params up to 0/0 cases, which come back
    flagged undefined.
    """
    level3 = mp.xi**2 + mp.eta0sq
    level2 = mp.delta**2 + mp.tau0sq
    level1 = mp.gamma**2 + mp.sigma2
    total = level3 + level2 + level1

    def ratio(num, den):
        den = np.asarray(den, dtype=float)
        ok = den > 0
        out = np.full(mp.M, np.nan)
        np.divide(num, den, out=out, where=ok)
        return out, ok

    values: dict[str, np.ndarray] = {}
    defined: dict[str, np.ndarray] = {}
    for name, num, den in (
        ("ICC.3", level3, total),
        ("ICC.2", level2, total),
        ("omega.3", mp.eta1sq, level3),
        ("omega.2", mp.tau1sq, level2),
    ):
        values[name], defined[name] = ratio(num, den)
    for name, num, den in (
        ("R2.3", mp.eta0sq, level3),
        ("R2.2", mp.tau0sq, level2),
        ("R2.1", mp.sigma2, level1),
    ):
        frac, ok = ratio(num, den)
        values[name] = 1.0 - frac
        defined[name] = ok
    return MomentEstimates(values=values, defined=defined)


# ---------------------------------------------------------------------------
# Generation.

def _cov_factor(cov: np.ndarray, label: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals.min() < -1e-8 * scale:
        raise DesignError([f"{label} covariance is not positive semi-definite"])
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _joint_effect_cov(
    sd0: np.ndarray, sd1: np.ndarray,
    rho0: np.ndarray, rho1: np.ndarray, kappa: np.ndarray,
) -> np.ndarray:
    cross = kappa * np.outer(sd0, sd1)
    top = np.hstack([rho0 * np.outer(sd0, sd0), cross])
    bottom = np.hstack([cross.T, rho1 * np.outer(sd1, sd1)])
    return np.vstack([top, bottom])


def _mvn(rng: np.random.Generator, n: int, factor: np.ndarray) -> np.ndarray:
    return rng.standard_normal((n, factor.shape[0])) @ factor.T


def generate_dataset(
    mp: DgpModelParams, c: DgpControlParams, seed: int | None = None
) -> GeneratedDataset:
    """Draw covariates, effects, and residuals layer by layer.

    Treatment impacts are constant for individuals in the same school;
    Y(1) differs from Y(0) by the school's average impact.
    """
    seed = DEFAULT_SEED if seed is None else int(seed)
    mats = _correlation_matrices(c)
    M, K, J, n = c.M, int(c.K), int(c.J), int(c.nbar)
    rng = stream(seed, DGP_STREAM, _GEN_SUB)

    f_V = _cov_factor(mats["rho_V"], "district covariate")
    f_X = _cov_factor(mats["rho_X"], "school covariate")
    f_C = _cov_factor(mats["rho_C"], "individual covariate")
    f_w = _cov_factor(
        _joint_effect_cov(
            np.sqrt(mp.eta0sq), np.sqrt(mp.eta1sq),
            mats["rho_w0"], mats["rho_w1"], mats["kappa_w"],
        ),
        "district effect",
    )
    f_u = _cov_factor(
        _joint_effect_cov(
            np.sqrt(mp.tau0sq), np.sqrt(mp.tau1sq),
            mats["rho_u0"], mats["rho_u1"], mats["kappa_u"],
        ),
        "school effect",
    )
    f_r = _cov_factor(mats["rho_r"] * np.outer(np.sqrt(mp.sigma2), np.sqrt(mp.sigma2)),
                      "residual")

    V = _mvn(rng, K, f_V)
    W = _mvn(rng, K, f_w)
    w0, w1 = W[:, :M], W[:, M:]
    mu0 = mp.Xi0 + mp.xi * V + w0
    mu1 = mp.Xi1 + w1

    X = _mvn(rng, K * J, f_X).reshape(K, J, M)
    U = _mvn(rng, K * J, f_u)
    u0 = U[:, :M].reshape(K, J, M)
    u1 = U[:, M:].reshape(K, J, M)
    theta0 = mu0[:, None, :] + mp.delta * X + u0
    psi1 = mu1[:, None, :] + u1

    N = K * J * n
    C = _mvn(rng, N, f_C).reshape(K, J, n, M)
    r = _mvn(rng, N, f_r).reshape(K, J, n, M)
    Y0 = theta0[:, :, None, :] + mp.gamma * C + r
    Y1 = Y0 + psi1[:, :, None, :]

    return GeneratedDataset(
        M=M, K=K, J=J, nbar=n,
        V=V, w0=w0, w1=w1, mu0=mu0, mu1=mu1,
        X=X, u0=u0, u1=u1, theta0=theta0, psi1=psi1,
        C=C, r=r, Y0=Y0, Y1=Y1,
    )


# ---------------------------------------------------------------------------
# Randomization schemes.

def _exact_within(rng: np.random.Generator, groups: int, size: int, share: float,
                  label: str) -> np.ndarray:
    treated = math.floor(size * share)
    if treated < 1 or treated >= size:
        raise DesignError(
            [
                f"Tbar={share:g} assigns {treated} of {size} units to treatment "
                f"per {label}; every group needs both arms"
            ]
        )
    ranks = np.argsort(rng.random((groups, size)), axis=1).argsort(axis=1)
    return (ranks < treated).astype(float)


def assign_treatment(
    scheme: str, K: int, J: int, nbar: int, Tbar: float, seed: int | None = None
) -> np.ndarray:
    """Treatment indicator array of shape (K, J, nbar).

    Exact schemes treat floor(group size * Tbar) units per randomized
    group; non-integral products are floored.
    """
    seed = DEFAULT_SEED if seed is None else int(seed)
    if scheme not in SCHEMES:
        raise DesignError(
            [f"unknown randomization scheme {scheme!r}; valid: {', '.join(SCHEMES)}"]
        )
    if min(K, J, nbar) < 1:
        raise DesignError(["K, J, nbar must all be >= 1"])
    if not 0 < Tbar < 1:
        raise DesignError(["Tbar must be in (0,1)"])
    rng = stream(seed, DGP_STREAM, _ASSIGN_SUB)

    if scheme == "simple":
        return (rng.random((K, J, nbar)) < Tbar).astype(float)
    if scheme == "blocked-individual":
        return _exact_within(rng, K * J, nbar, Tbar, "school").reshape(K, J, nbar)
    if scheme == "cluster-2":
        schools = _exact_within(rng, 1, K * J, Tbar, "sample").reshape(K, J)
        return np.broadcast_to(schools[:, :, None], (K, J, nbar)).copy()
    if scheme == "blocked-cluster-2":
        schools = _exact_within(rng, K, J, Tbar, "district")
        return np.broadcast_to(schools[:, :, None], (K, J, nbar)).copy()
    districts = _exact_within(rng, 1, K, Tbar, "sample").reshape(K)
    return np.broadcast_to(districts[:, None, None], (K, J, nbar)).copy()


# ---------------------------------------------------------------------------
# Moment recovery.

def empirical_moments(ds: GeneratedDataset) -> MomentEstimates:
    """Plug-in variance-ratio estimates from the retained latent columns."""
    if ds.J * ds.K < 2 or ds.nbar < 2:
        raise DesignError(["need at least 2 units at the school and individual level"])

    def var(a: np.ndarray) -> np.ndarray:
        flat = a.reshape(-1, ds.M)
        if flat.shape[0] < 2:
            return np.full(ds.M, np.nan)
        return flat.var(axis=0, ddof=1)

    v_mu0 = var(ds.mu0)
    v_mu1 = var(ds.mu1)
    v_w0 = var(ds.w0)
    v_theta = var(ds.theta0 - ds.mu0[:, None, :])
    v_u0 = var(ds.u0)
    v_u1 = var(ds.psi1 - ds.mu1[:, None, :])
    v_indiv = var(ds.Y0 - ds.theta0[:, :, None, :])
    v_r = var(ds.r)

    level3 = np.where(np.isnan(v_mu0), 0.0, v_mu0)
    total = level3 + v_theta + v_indiv

    values: dict[str, np.ndarray] = {}
    defined: dict[str, np.ndarray] = {}

    def ratio(name: str, num: np.ndarray, den: np.ndarray):
        ok = np.isfinite(num) & np.isfinite(den) & (den > 0)
        out = np.full(ds.M, np.nan)
        np.divide(num, den, out=out, where=ok)
        values[name] = out
        defined[name] = ok

    ratio("ICC.3", v_mu0, total)
    ratio("ICC.2", v_theta, total)
    ratio("omega.3", v_mu1, v_mu0)
    ratio("omega.2", v_u1, v_theta)
    ratio("R2.3", v_w0, v_mu0)
    values["R2.3"] = 1.0 - values["R2.3"]
    ratio("R2.2", v_u0, v_theta)
    values["R2.2"] = 1.0 - values["R2.2"]
    ratio("R2.1", v_r, v_indiv)
    values["R2.1"] = 1.0 - values["R2.1"]
    return MomentEstimates(values=values, defined=defined)
