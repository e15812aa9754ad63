"""Adjustment procedures against hand-frozen vectors and naive references."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pump.mtp import (
    MTPS,
    MtpError,
    NullStatisticSource,
    adjust_bh,
    adjust_bonferroni,
    adjust_holm,
    adjust_matrix,
    adjust_wy_sd,
    adjust_wy_ss,
    draw_null_pvalues,
    warn_if_b_too_small,
)

# ---------------------------------------------------------------------------
# Reference implementations, transcribed line by line from the stepwise
# definitions. Deliberately naive; the package versions are vectorized.


def _ref_bf(p):
    M = len(p)
    return [min(1.0, M * x) for x in p]


def _ref_ho(p):
    M = len(p)
    order = sorted(range(M), key=lambda i: (p[i], i))
    adj = [0.0] * M
    run = 0.0
    for rank, i in enumerate(order):
        run = max(run, min(1.0, (M - rank) * p[i]))
        adj[i] = run
    return adj


def _ref_bh(p):
    M = len(p)
    order = sorted(range(M), key=lambda i: (p[i], i))
    vals = [min(1.0, p[i] * (M / (r + 1))) for r, i in enumerate(order)]
    for r in range(M - 2, -1, -1):
        vals[r] = min(vals[r], vals[r + 1])
    adj = [0.0] * M
    for r, i in enumerate(order):
        adj[i] = vals[r]
    return adj


# Frozen outputs of the references above (generated once, spot-checked by
# hand: e.g. Holm on (0.01,0.02,0.04) multiplies by 3,2,1 then runs the max).
FROZEN = {
    (0.01, 0.02, 0.04): {
        "BF": [0.03, 0.06, 0.12],
        "HO": [0.03, 0.04, 0.04],
        "BH": [0.03, 0.03, 0.04],
    },
    (0.04, 0.02, 0.01): {
        "BF": [0.12, 0.06, 0.03],
        "HO": [0.04, 0.04, 0.03],
        "BH": [0.04, 0.03, 0.03],
    },
    (0.5, 0.6): {
        "BF": [1.0, 1.0],
        "HO": [1.0, 1.0],
        "BH": [0.6, 0.6],
    },
    (0.05, 0.05, 0.05): {
        "BF": [0.15000000000000002] * 3,
        "HO": [0.15000000000000002] * 3,
        "BH": [0.05, 0.05, 0.05],
    },
    (0.04,): {
        "BF": [0.04],
        "HO": [0.04],
        "BH": [0.04],
    },
    (0.02, 0.02, 0.05): {
        "BF": [0.06, 0.06, 0.15000000000000002],
        "HO": [0.06, 0.06, 0.06],
        "BH": [0.03, 0.03, 0.05],
    },
    (0.3, 0.4, 0.5, 0.6): {
        "BF": [1.0, 1.0, 1.0, 1.0],
        "HO": [1.0, 1.0, 1.0, 1.0],
        "BH": [0.6, 0.6, 0.6, 0.6],
    },
    (0.001, 0.9, 0.9, 0.9): {
        "BF": [0.004, 1.0, 1.0, 1.0],
        "HO": [0.004, 1.0, 1.0, 1.0],
        "BH": [0.004, 0.9, 0.9, 0.9],
    },
    (0.25, 0.5, 0.75): {
        "BF": [0.75, 1.0, 1.0],
        "HO": [0.75, 1.0, 1.0],
        "BH": [0.75, 0.75, 0.75],
    },
    (0.012, 0.034, 0.056, 0.078, 0.09): {
        "BF": [0.06, 0.17, 0.28, 0.39, 0.44999999999999996],
        "HO": [0.06, 0.136, 0.168, 0.168, 0.168],
        "BH": [0.06, 0.085, 0.09, 0.09, 0.09],
    },
    (0.2, 0.1): {
        "BF": [0.4, 0.2],
        "HO": [0.2, 0.2],
        "BH": [0.2, 0.2],
    },
    (0.6, 0.7, 0.8): {
        "BF": [1.0, 1.0, 1.0],
        "HO": [1.0, 1.0, 1.0],
        "BH": [0.8, 0.8, 0.8],
    },
    (1.0, 0.0, 0.5): {
        "BF": [1.0, 0.0, 1.0],
        "HO": [1.0, 0.0, 1.0],
        "BH": [1.0, 0.0, 0.75],
    },
    (0.011, 0.011, 0.011, 0.011): {
        "BF": [0.044] * 4,
        "HO": [0.044] * 4,
        "BH": [0.011] * 4,
    },
}

_ADJUSTERS = {"BF": adjust_bonferroni, "HO": adjust_holm, "BH": adjust_bh}


@pytest.mark.parametrize("raw", sorted(FROZEN))
@pytest.mark.parametrize("mtp", ["BF", "HO", "BH"])
def test_frozen_vectors_exact(raw, mtp):
    got = _ADJUSTERS[mtp](list(raw))
    assert np.array_equal(got, np.asarray(FROZEN[raw][mtp]))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6))
@settings(deadline=None, max_examples=300)
def test_vectorized_matches_reference(p):
    assert np.array_equal(adjust_bonferroni(p), np.asarray(_ref_bf(p)))
    assert np.array_equal(adjust_holm(p), np.asarray(_ref_ho(p)))
    assert np.array_equal(adjust_bh(p), np.asarray(_ref_bh(p)))


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6))
@settings(deadline=None, max_examples=200)
def test_dominance_chain(p):
    raw = np.asarray(p)
    bf = adjust_bonferroni(p)
    ho = adjust_holm(p)
    bh = adjust_bh(p)
    for adj in (bf, ho, bh):
        assert np.all(adj >= raw)
    assert np.all(ho <= bf)
    assert np.all(bh <= ho)


@given(st.lists(st.floats(0.001, 0.999), min_size=2, max_size=6, unique=True),
       st.randoms(use_true_random=False))
@settings(deadline=None, max_examples=200)
def test_order_preservation_and_permutation_equivariance(p, rnd):
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    for adjuster in (adjust_bonferroni, adjust_holm, adjust_bh):
        adj = adjuster(p)
        # Sorting raw must sort adjusted identically (ties impossible here
        # in raw; adjusted may tie, so compare via a stable key on raw).
        order = np.argsort(np.asarray(p), kind="stable")
        assert np.all(np.diff(adj[order]) >= 0)
        shuffled = [p[i] for i in perm]
        assert np.array_equal(adjuster(shuffled), adj[perm])


def test_adjust_matrix_passthrough_and_rowwise():
    F = np.array([[0.01, 0.5], [0.03, 0.9]])
    assert np.array_equal(adjust_matrix("None", F), F)
    assert np.array_equal(adjust_matrix("BF", F), np.array([[0.02, 1.0], [0.06, 1.0]]))
    holm = adjust_matrix("HO", F)
    assert np.all(holm <= adjust_matrix("BF", F))


def test_adjust_matrix_validates_inputs():
    with pytest.raises(MtpError, match="unknown MTP"):
        adjust_matrix("BONF", np.array([[0.1]]))
    with pytest.raises(MtpError, match=r"\[0,1\]"):
        adjust_matrix("BF", np.array([[0.1, 1.2]]))
    with pytest.raises(MtpError, match="requires a null"):
        adjust_matrix("WY-SS", np.array([[0.1, 0.2]]))


def _null_source(M, B, rho=0.0, df=1_000_000, seed=7):
    return NullStatisticSource(df=df, rho=rho, M=M, B=B, seed=seed)


def test_wy_resolution_floor():
    src = _null_source(M=2, B=99)
    adj = adjust_wy_ss([0.0, 0.5], src)
    assert adj[0] == pytest.approx(1.0 / 100.0, abs=0)


def test_wy_single_outcome_is_identity():
    src = _null_source(M=1, B=50)
    F = np.array([[0.2], [0.7], [0.0]])
    assert np.array_equal(adjust_matrix("WY-SS", F, src), F)
    assert np.array_equal(adjust_matrix("WY-SD", F, src), F)


def test_wy_ss_independence_oracle():
    # Independent outcomes at large df: the min-p distribution is known,
    # adjusted p -> 1-(1-p)^M. MC tolerance 2/sqrt(B).
    B = 100_000
    src = _null_source(M=2, B=B)
    adj = adjust_wy_ss([0.05, 0.5], src)
    assert adj[0] == pytest.approx(1 - 0.95**2, abs=2 / np.sqrt(B))
    assert adj[1] == pytest.approx(1 - 0.5**2, abs=2 / np.sqrt(B))


def test_wy_sd_below_ss_on_shared_batch():
    rng = np.random.default_rng(3)
    F = rng.uniform(size=(200, 4))
    null_p = draw_null_pvalues(_null_source(M=4, B=500))
    ss = adjust_matrix("WY-SS", F, null_p)
    sd = adjust_matrix("WY-SD", F, null_p)
    assert np.all(sd <= ss)
    assert np.all(sd >= F - 3 / np.sqrt(500))


def test_wy_sd_largest_p_converges_to_raw():
    B = 100_000
    src = _null_source(M=3, B=B)
    raw = [0.2, 0.5, 0.83]
    adj = adjust_wy_sd(raw, src)
    assert adj[2] == pytest.approx(0.83, abs=2 / np.sqrt(B) + 1 / (B + 1))


def test_wy_deterministic_given_seed():
    src = _null_source(M=3, B=1000, rho=0.4, df=25)
    a = draw_null_pvalues(src)
    b = draw_null_pvalues(src)
    assert np.array_equal(a, b)
    F = np.random.default_rng(11).uniform(size=(50, 3))
    assert np.array_equal(adjust_matrix("WY-SD", F, src), adjust_matrix("WY-SD", F, src))


def test_warn_when_b_cannot_resolve_alpha():
    with pytest.warns(UserWarning, match="cannot resolve"):
        warn_if_b_too_small(10, 0.05)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        warn_if_b_too_small(1000, 0.05)


def test_mtp_codes_catalog():
    assert MTPS == ("None", "BF", "HO", "BH", "WY-SS", "WY-SD")
