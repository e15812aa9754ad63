import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pump.designs import DesignError, DesignParams, EffectSpec
from pump.engine import PowerRequest, pump_power
from pump.explore import GridSpec, cell_seed, expand_grid, run_grid, update_request
from pump.search import SearchGoal


def _base2(M=3, **kw):
    params = dict(M=M, nbar=50, J=20, Tbar=0.5, numCovar_1=1, ICC_2=0.2, R2_1=0.1)
    params.update(kw)
    return PowerRequest(
        design="d2.1_m2fc",
        params=DesignParams(**params),
        effects=EffectSpec(MDES=0.125),
        rho=0.5,
    )


def _base3(M=5):
    return PowerRequest(
        design="d3.2_m3fc2rc",
        params=DesignParams(
            M=M, nbar=40, J=3, K=15, Tbar=0.5, numCovar_1=1, numCovar_2=1,
            R2_1=0.1, R2_2=0.5, ICC_2=0.05, ICC_3=0.4,
        ),
        effects=EffectSpec(MDES=0.15),
        rho=0.4,
    )


def test_update_single_field():
    base = _base2(ICC_2=0.05)
    out = update_request(base, {"ICC.2": 0.20})
    assert out.params.ICC_2 == 0.20
    assert out.design == base.design
    assert out.params.nbar == base.params.nbar
    assert out.params.R2_1 == base.params.R2_1
    assert out.effects is base.effects
    assert out.mtps == base.mtps and out.tnum == base.tnum


def test_update_vector_override():
    base = _base3(M=5)
    out = update_request(base, {"R2.1": (0.1, 0.3, 0.1, 0.2, 0.2)})
    assert out.params.R2_1 == (0.1, 0.3, 0.1, 0.2, 0.2)


def test_update_dimension_mismatch():
    base = _base3(M=5)
    with pytest.raises(DesignError):
        update_request(base, {"M": 4, "MDES": (0.1, 0.1, 0.1, 0.1, 0.1)})


def test_update_unknown_parameter():
    with pytest.raises(DesignError, match="unknown parameter 'ICC2'"):
        update_request(_base2(), {"ICC2": 0.1})


def test_update_rejects_invalid_merge():
    # the override is a fine value on its own but invalid for this design
    with pytest.raises(DesignError):
        update_request(_base2(), {"ICC.3": 0.2})


def test_update_mtp_string_or_list():
    out = update_request(_base2(), {"MTP": "BF"})
    assert out.mtps == ("BF",)
    out = update_request(_base2(), {"MTP": ["BF", "HO"]})
    assert out.mtps == ("BF", "HO")


def test_grid_28_cells_row_major():
    icc2 = [round(0.05 * i, 2) for i in range(7)]
    icc3 = [round(0.2 * i, 1) for i in range(4)]
    g = GridSpec(base=_base3(), varying={"ICC.2": icc2, "ICC.3": icc3})
    cells = expand_grid(g)
    assert len(cells) == 28
    assert all(c.request is not None for c in cells)
    expected = list(itertools.product(icc2, icc3))
    assert [(c.coords["ICC.2"], c.coords["ICC.3"]) for c in cells] == expected
    # last declared parameter varies fastest
    assert cells[1].coords == {"ICC.2": 0.0, "ICC.3": 0.2}
    assert [c.index for c in cells] == list(range(28))


@given(
    shape=st.lists(st.integers(min_value=1, max_value=4), min_size=1, max_size=3)
)
@settings(max_examples=25, deadline=None)
def test_grid_order_matches_itertools_product(shape):
    names = ["ICC.2", "R2.1", "nbar"][: len(shape)]
    varying = {
        "ICC.2": [round(0.05 * (i + 1), 2) for i in range(shape[0])],
    }
    if len(shape) > 1:
        varying["R2.1"] = [round(0.1 * (i + 1), 1) for i in range(shape[1])]
    if len(shape) > 2:
        varying["nbar"] = [30 + 10 * i for i in range(shape[2])]
    cells = expand_grid(GridSpec(base=_base2(), varying=varying))
    expected = list(itertools.product(*(varying[n] for n in names)))
    got = [tuple(c.coords[n] for n in names) for c in cells]
    assert got == expected


def test_invalid_cell_flagged_not_dropped():
    g = GridSpec(base=_base3(), varying={"ICC.2": [0.3, 0.6], "ICC.3": [0.3, 0.5]})
    cells = expand_grid(g)
    assert len(cells) == 4
    bad = [c for c in cells if c.error is not None]
    assert len(bad) == 1
    assert bad[0].coords == {"ICC.2": 0.6, "ICC.3": 0.5}
    assert bad[0].request is None
    res = run_grid(g, seed=1, tnum=100)
    frame = res.to_frame()
    flagged = frame[frame.status != "ok"]
    assert len(flagged) == 1
    assert flagged.iloc[0]["ICC.2"] == 0.6 and flagged.iloc[0]["ICC.3"] == 0.5
    assert flagged.iloc[0].status.startswith("invalid:")
    assert (frame.status == "ok").sum() > 0


def test_grid_requires_scalar_values():
    with pytest.raises(DesignError, match="one scalar value per cell"):
        expand_grid(GridSpec(base=_base2(), varying={"MDES": [0.1, [0.2, 0.3, 0.4]]}))


def test_grid_rejects_varying_mtp():
    with pytest.raises(DesignError, match="MTP cannot vary"):
        expand_grid(GridSpec(base=_base2(), varying={"MTP": ["BF", "HO"]}))


def test_grid_rejects_unknown_parameter():
    with pytest.raises(DesignError, match="unknown grid parameter"):
        expand_grid(GridSpec(base=_base2(), varying={"ICC_2": [0.1]}))


def test_grid_goal_consistency():
    goal = SearchGoal(quantity="MDES", power_definition="D1indiv", target_power=0.8)
    with pytest.raises(DesignError, match="does not take a goal"):
        expand_grid(GridSpec(base=_base2(), varying={"nbar": [40]}, goal=goal))
    with pytest.raises(DesignError, match="needs a goal"):
        expand_grid(GridSpec(base=_base2(), varying={"nbar": [40]}, quantity="mdes"))
    with pytest.raises(DesignError, match="goal.quantity"):
        expand_grid(
            GridSpec(
                base=_base2(),
                varying={"nbar": [40]},
                quantity="sample",
                goal=goal,
            )
        )


def test_run_grid_long_format_columns():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.1, 0.2]})
    res = run_grid(g, seed=2, tnum=200)
    frame = res.to_frame()
    assert list(frame.columns) == ["ICC.2", "MTP", "definition", "value", "mc_se", "status"]
    # one row per cell x MTP x definition: M=3, MTP=None -> indiv x3 + mean
    assert len(frame) == 2 * 4
    csv = res.to_csv()
    assert csv.splitlines()[0] == "ICC.2,MTP,definition,value,mc_se,status"
    assert len(csv.splitlines()) == 1 + len(frame)


def test_run_grid_rows_per_pair():
    icc2 = [round(0.05 * i, 2) for i in range(7)]
    icc3 = [round(0.2 * i, 1) for i in range(4)]
    g = GridSpec(
        base=replace(_base3(), mtps=("BF",)),
        varying={"ICC.2": icc2, "ICC.3": icc3},
    )
    frame = run_grid(g, seed=3, tnum=100).to_frame()
    for (_, _), group in frame.groupby(["MTP", "definition"]):
        assert len(group) == 28


def test_singleton_grid_equals_direct_call():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.2]})
    rows = run_grid(g, seed=9, tnum=400).to_records()
    direct = pump_power(replace(_base2(), tnum=400), seed=cell_seed(9, (0,))).to_records()
    assert len(rows) == len(direct)
    for got, want in zip(rows, direct):
        assert got == {**want, "ICC.2": 0.2, "status": "ok"}


def test_appending_a_value_leaves_other_cells():
    base = _base2()
    g2 = GridSpec(base=base, varying={"R2.1": [0.1, 0.3], "ICC.2": [0.1, 0.2]})
    g3 = GridSpec(base=base, varying={"R2.1": [0.1, 0.3], "ICC.2": [0.1, 0.2, 0.3]})
    r2 = run_grid(g2, seed=5, tnum=300).to_frame()
    r3 = run_grid(g3, seed=5, tnum=300).to_frame()
    sub = r3[r3["ICC.2"].isin([0.1, 0.2])].reset_index(drop=True)
    assert sub.equals(r2)


def test_rerun_reproduces_table():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.1, 0.2], "nbar": [40, 60]})
    a = run_grid(g, seed=11, tnum=250).to_frame()
    b = run_grid(g, seed=11, tnum=250).to_frame()
    assert a.equals(b)


def test_complete_power_climbs_with_rho():
    rhos = [round(0.15 * i, 2) for i in range(7)]
    g = GridSpec(
        base=replace(_base2(), mtps=("BF", "WY-SD"), B=1200),
        varying={"rho": rhos},
    )
    frame = run_grid(g, seed=4, tnum=1500).to_frame()
    for mtp in ("BF", "WY-SD"):
        sub = frame[(frame.MTP == mtp) & (frame.definition == "complete")]
        sub = sub.sort_values("rho").reset_index(drop=True)
        assert list(sub.rho) == rhos
        for i in range(len(sub) - 1):
            slack = 3.0 * float(np.hypot(sub.mc_se[i], sub.mc_se[i + 1]))
            assert sub.value[i + 1] >= sub.value[i] - slack


def test_complete_power_only_without_zeroed_outcomes():
    g = GridSpec(
        base=replace(_base3(M=5), mtps=("BF",)),
        varying={"numZero": [0, 1, 2, 3, 4]},
    )
    frame = run_grid(g, seed=6, tnum=200).to_frame()
    complete = frame[frame.definition == "complete"]
    assert list(complete.numZero) == [0]
    assert set(frame.numZero) == {0, 1, 2, 3, 4}


def test_mdes_grid():
    base = PowerRequest(
        design="d1.1_m1c",
        params=DesignParams(M=1, nbar=400, Tbar=0.5, numCovar_1=1, R2_1=0.3),
        effects=EffectSpec(MDES=0.2),
    )
    goal = SearchGoal(
        quantity="MDES", power_definition="D1indiv", target_power=0.6,
        tol=0.02, start_tnum=300, tnum=800, final_tnum=3000,
    )
    g = GridSpec(base=base, varying={"nbar": [400, 700]}, quantity="mdes", goal=goal)
    res = run_grid(g, seed=12)
    frame = res.to_frame()
    assert list(frame.columns) == ["nbar", "MTP", "definition", "value", "mc_se", "status"]
    assert len(frame) == 2
    assert set(frame.MTP) == {"None"}
    assert set(frame.definition) == {"D1indiv"}
    assert (frame.status == "ok").all()
    by_n = dict(zip(frame.nbar, frame.value))
    assert by_n[400] > by_n[700] > 0


def test_sample_grid():
    base = PowerRequest(
        design="d1.1_m1c",
        params=DesignParams(M=1, nbar=100, Tbar=0.5, numCovar_1=1, R2_1=0.3),
        effects=EffectSpec(MDES=0.25),
    )
    goal = SearchGoal(
        quantity="nbar", power_definition="D1indiv", target_power=0.7,
        tol=0.02, start_tnum=300, tnum=800, final_tnum=3000,
    )
    g = GridSpec(base=base, varying={"R2.1": [0.0, 0.5]}, quantity="sample", goal=goal)
    frame = run_grid(g, seed=13).to_frame()
    assert (frame.status == "ok").all()
    by_r2 = dict(zip(frame["R2.1"], frame.value))
    assert by_r2[0.0] > by_r2[0.5] >= 2
    assert float(by_r2[0.0]) == int(by_r2[0.0])


def test_budget_zero_skips_everything():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.1, 0.2, 0.3]})
    frame = run_grid(g, seed=1, tnum=100, budget_ms=0).to_frame()
    assert len(frame) == 3
    assert (frame.status == "skipped: budget exceeded").all()
    assert frame.value.isna().all()


def test_budget_large_skips_nothing():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.1, 0.2]})
    frame = run_grid(g, seed=1, tnum=100, budget_ms=1e7).to_frame()
    assert (frame.status == "ok").all()


def test_grid_default_tnum_is_reduced():
    g = GridSpec(base=_base2(), varying={"ICC.2": [0.2]})
    res = run_grid(g, seed=2)
    assert res.tnum == 1000
    # base request asked for more; the grid default wins unless overridden
    assert _base2().tnum > 1000
    assert run_grid(g, seed=2, tnum=500).tnum == 500
