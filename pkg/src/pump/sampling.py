"""Correlated t-statistic sampling shared by the power engine and the
permutation-style adjustment procedures."""

from __future__ import annotations

from typing import Any

import numpy as np
from scipy import stats

from .seeding import chunk_ranges, stream


def normalize_rho(rho: Any, M: int) -> np.ndarray:
    """Scalar rho -> equicorrelation matrix; matrices checked for shape,
    symmetry, and unit diagonal."""
    arr = np.asarray(rho, dtype=float)
    if arr.ndim == 0:
        out = np.full((M, M), float(arr))
        np.fill_diagonal(out, 1.0)
        return out
    if arr.shape != (M, M):
        raise ValueError(f"rho must be a scalar or {M}x{M} matrix, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise ValueError("rho matrix must be symmetric")
    if not np.allclose(np.diag(arr), 1.0, atol=1e-12):
        raise ValueError("rho matrix must have unit diagonal")
    return arr


def psd_factor(rho: np.ndarray) -> np.ndarray:
    """Symmetric factor A with A @ A.T = rho. Tiny negative eigenvalues from
    rounding are clipped; genuinely indefinite matrices are rejected."""
    vals, vecs = np.linalg.eigh(rho)
    tol = 1e-8 * max(1.0, float(vals.max(initial=0.0)))
    if float(vals.min(initial=0.0)) < -tol:
        raise ValueError("rho matrix is not positive semi-definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_t_rows(
    shift: Any,
    df: float,
    factor: np.ndarray,
    n: int,
    seed: int,
    stream_id: int,
) -> np.ndarray:
    """n rows of z/sqrt(w/df) + shift: correlated central t variates (one
    shared chi-square scale per row) plus a per-outcome location shift, so
    each margin is a t distribution with mean shift_m.

    Chunked with per-chunk derived seeds; output depends only on (seed,
    stream_id, n), never on scheduling.
    """
    M = factor.shape[0]
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (M,))
    out = np.empty((n, M))
    for start, stop, c in chunk_ranges(n):
        rng = stream(seed, stream_id, c)
        z = rng.standard_normal((stop - start, M)) @ factor.T
        w = rng.chisquare(df, size=stop - start)
        out[start:stop] = z / np.sqrt(w / df)[:, None] + shift
    return out


def pvalues(E: np.ndarray, df: float, two_sided: bool = True) -> np.ndarray:
    if two_sided:
        return 2.0 * stats.t.sf(np.abs(E), df)
    return np.asarray(stats.t.sf(E, df))
