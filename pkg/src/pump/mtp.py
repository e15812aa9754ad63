"""Multiple testing procedures.

Five adjustment procedures plus a passthrough, applied row-wise to matrices
of raw p-values. The Westfall-Young variants estimate adjusted p-values
against a shared batch of null-hypothesis draws.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .sampling import normalize_rho, psd_factor, pvalues, sample_t_rows
from .seeding import DEFAULT_SEED, NULL_STREAM

MTPS: tuple[str, ...] = ("None", "BF", "HO", "BH", "WY-SS", "WY-SD")


class MtpError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NullStatisticSource:
    """Recipe for the shared null batch used by WY-SS and WY-SD: B draws of
    central correlated t rows converted to p-values."""

    df: float
    rho: Any
    M: int
    B: int = 1000
    seed: int = DEFAULT_SEED
    two_sided: bool = True


def needs_nulls(mtp: str) -> bool:
    return mtp in ("WY-SS", "WY-SD")


def warn_if_b_too_small(B: int, alpha: float) -> None:
    # (1+count)/(B+1) can never go below 1/(B+1).
    if 1.0 / (B + 1.0) > alpha:
        warnings.warn(
            f"B={B} cannot resolve adjusted p-values below alpha={alpha}; increase B",
            stacklevel=2,
        )


def draw_null_pvalues(src: NullStatisticSource) -> np.ndarray:
    if src.B < 1:
        raise MtpError(f"B must be >= 1, got {src.B}")
    rho = normalize_rho(src.rho, src.M)
    E = sample_t_rows(0.0, src.df, psd_factor(rho), src.B, src.seed, NULL_STREAM)
    return pvalues(E, src.df, src.two_sided)


def _check_pvalues(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise MtpError(f"p-value matrix must be 2-D and nonempty, got shape {F.shape}")
    if not np.all(np.isfinite(F)) or np.any(F < 0) or np.any(F > 1):
        raise MtpError("p-values must lie in [0,1]")
    return F


def _holm_matrix(F: np.ndarray) -> np.ndarray:
    M = F.shape[1]
    order = np.argsort(F, axis=1, kind="stable")
    sp = np.take_along_axis(F, order, axis=1)
    adj = sp * (M - np.arange(M))
    np.maximum.accumulate(adj, axis=1, out=adj)
    np.minimum(adj, 1.0, out=adj)
    out = np.empty_like(adj)
    np.put_along_axis(out, order, adj, axis=1)
    return out


def _bh_matrix(F: np.ndarray) -> np.ndarray:
    M = F.shape[1]
    order = np.argsort(F, axis=1, kind="stable")
    sp = np.take_along_axis(F, order, axis=1)
    # Multiplier computed first so the rank-M entry (multiplier exactly 1)
    # stays bit-identical to its raw p-value.
    adj = sp * (M / np.arange(1, M + 1))
    np.minimum(adj, 1.0, out=adj)
    adj = np.minimum.accumulate(adj[:, ::-1], axis=1)[:, ::-1]
    out = np.empty_like(adj)
    np.put_along_axis(out, order, adj, axis=1)
    return out


class _SuffixMinTable:
    """Sorted distributions of min-over-subset null p-values, built lazily.

    At most 2^M subsets exist, and only those appearing as a suffix of some
    row's ordering are materialized.
    """

    def __init__(self, null_p: np.ndarray):
        self.null_p = null_p
        self.cache: dict[tuple[int, ...], np.ndarray] = {}

    def sorted_mins(self, cols: tuple[int, ...]) -> np.ndarray:
        hit = self.cache.get(cols)
        if hit is None:
            hit = np.sort(self.null_p[:, list(cols)].min(axis=1))
            self.cache[cols] = hit
        return hit


def _wy_ss_matrix(F: np.ndarray, null_p: np.ndarray) -> np.ndarray:
    B = null_p.shape[0]
    mins = np.sort(null_p.min(axis=1))
    counts = np.searchsorted(mins, F, side="right")
    return (1.0 + counts) / (B + 1.0)


def _wy_sd_matrix(F: np.ndarray, null_p: np.ndarray) -> np.ndarray:
    tnum, M = F.shape
    B = null_p.shape[0]
    order = np.argsort(F, axis=1, kind="stable")
    sp = np.take_along_axis(F, order, axis=1)
    counts = np.empty((tnum, M), dtype=np.int64)
    table = _SuffixMinTable(null_p)
    uniq, inv = np.unique(order, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    for g in range(uniq.shape[0]):
        rows = np.nonzero(inv == g)[0]
        perm = uniq[g]
        for i in range(M):
            key = tuple(sorted(perm[i:].tolist()))
            counts[rows, i] = np.searchsorted(
                table.sorted_mins(key), sp[rows, i], side="right"
            )
    adj = (1.0 + counts) / (B + 1.0)
    np.maximum.accumulate(adj, axis=1, out=adj)
    out = np.empty_like(adj)
    np.put_along_axis(out, order, adj, axis=1)
    return out


def adjust_matrix(
    mtp: str,
    F: np.ndarray,
    nulls: NullStatisticSource | np.ndarray | None = None,
) -> np.ndarray:
    """Row-wise adjusted p-values for one procedure.

    WY variants need `nulls`: either a NullStatisticSource or a precomputed
    B x M null p-value matrix (so one batch can serve several procedures).
    """
    F = _check_pvalues(F)
    M = F.shape[1]
    if mtp == "None":
        return F.copy()
    if mtp == "BF":
        return np.minimum(1.0, F * M)
    if mtp == "HO":
        return _holm_matrix(F)
    if mtp == "BH":
        return _bh_matrix(F)
    if mtp in ("WY-SS", "WY-SD"):
        if nulls is None:
            raise MtpError(f"{mtp} requires a null statistic source")
        if M == 1:
            # Min over a single test is the test itself; skip estimation
            # noise and return the exact identity.
            return F.copy()
        null_p = nulls if isinstance(nulls, np.ndarray) else draw_null_pvalues(nulls)
        if null_p.ndim != 2 or null_p.shape[1] != M:
            raise MtpError(
                f"null p-value matrix must have {M} columns, got shape {null_p.shape}"
            )
        if mtp == "WY-SS":
            return _wy_ss_matrix(F, null_p)
        return _wy_sd_matrix(F, null_p)
    raise MtpError(f"unknown MTP {mtp!r}; valid codes: {', '.join(MTPS)}")


def _as_row(raw: Any) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 1:
        raise MtpError(f"expected a 1-D p-value vector, got shape {arr.shape}")
    return arr[None, :]


def adjust_bonferroni(raw: Any) -> np.ndarray:
    return adjust_matrix("BF", _as_row(raw))[0]


def adjust_holm(raw: Any) -> np.ndarray:
    return adjust_matrix("HO", _as_row(raw))[0]


def adjust_bh(raw: Any) -> np.ndarray:
    return adjust_matrix("BH", _as_row(raw))[0]


def adjust_wy_ss(raw: Any, nulls: NullStatisticSource | np.ndarray) -> np.ndarray:
    return adjust_matrix("WY-SS", _as_row(raw), nulls)[0]


def adjust_wy_sd(raw: Any, nulls: NullStatisticSource | np.ndarray) -> np.ndarray:
    return adjust_matrix("WY-SD", _as_row(raw), nulls)[0]
