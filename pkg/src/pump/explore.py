"""Scenario updates and parameter grids.

A scenario is one power request; exploring it means reevaluating after
changing a handful of parameters, or sweeping a few parameters over value
lists and collecting the full cross of results in long format.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import pandas as pd

from .designs import DesignError
from .engine import PowerRequest, pump_power, resolve
from .search import SearchGoal, SearchResult, pump_mdes, pump_sample
from .seeding import DEFAULT_SEED, GRID_STREAM, stream

# Grids trade per-cell precision for breadth; one cell at this tnum has
# mc_se <= 0.016, enough to read a trend off a table or heat map.
GRID_TNUM = 1000

# Parameter spellings accepted by update_request and GridSpec.varying,
# mapped to (where, attribute). "where" is the request section to rebuild.
_PARAM_MAP: dict[str, tuple[str, str]] = {
    "design": ("request", "design"),
    "rho": ("request", "rho"),
    "tnum": ("request", "tnum"),
    "B": ("request", "B"),
    "MTP": ("request", "mtps"),
    "M": ("params", "M"),
    "nbar": ("params", "nbar"),
    "J": ("params", "J"),
    "K": ("params", "K"),
    "Tbar": ("params", "Tbar"),
    "numCovar.1": ("params", "numCovar_1"),
    "numCovar.2": ("params", "numCovar_2"),
    "numCovar.3": ("params", "numCovar_3"),
    "R2.1": ("params", "R2_1"),
    "R2.2": ("params", "R2_2"),
    "R2.3": ("params", "R2_3"),
    "ICC.2": ("params", "ICC_2"),
    "ICC.3": ("params", "ICC_3"),
    "omega.2": ("params", "omega_2"),
    "omega.3": ("params", "omega_3"),
    "alpha": ("params", "alpha"),
    "two_sided": ("params", "two_sided"),
    "MDES": ("effects", "MDES"),
    "numZero": ("effects", "numZero"),
}

_RESULT_COLUMNS = ("MTP", "definition", "value", "mc_se", "status")


def update_request(base: PowerRequest, overrides: dict[str, Any]) -> PowerRequest:
    """New request with `overrides` applied on top of `base`, then validated.

    Keys use the external spellings ("ICC.2", "nbar", "MDES", ...).  Values
    may be per-outcome vectors where the underlying parameter accepts them.
    The merged request is validated as a whole before being returned, so an
    override that is individually fine but inconsistent with the rest of the
    scenario is still rejected.
    """
    unknown = [k for k in overrides if k not in _PARAM_MAP]
    if unknown:
        raise DesignError(
            [
                f"unknown parameter {k!r}; valid names: {', '.join(sorted(_PARAM_MAP))}"
                for k in unknown
            ]
        )
    request_kw: dict[str, Any] = {}
    params_kw: dict[str, Any] = {}
    effects_kw: dict[str, Any] = {}
    buckets = {"request": request_kw, "params": params_kw, "effects": effects_kw}
    for name, value in overrides.items():
        where, attr = _PARAM_MAP[name]
        if name == "MTP":
            value = (value,) if isinstance(value, str) else tuple(value)
        buckets[where][attr] = value
    req = base
    if params_kw:
        req = replace(req, params=replace(req.params, **params_kw))
    if effects_kw:
        req = replace(req, effects=replace(req.effects, **effects_kw))
    if request_kw:
        req = replace(req, **request_kw)
    resolve(req)
    return req


@dataclass(frozen=True)
class GridSpec:
    """A base scenario plus parameter value lists to cross.

    `varying` maps external parameter spellings to lists of scalar values;
    each grid cell overrides the base with one value per parameter.  For
    quantity "power" every cell is a power table; for "mdes" or "sample"
    each cell runs the corresponding search and `goal` must be given.
    """

    base: PowerRequest
    varying: dict[str, list[Any]] = field(default_factory=dict)
    quantity: str = "power"
    goal: SearchGoal | None = None


@dataclass(frozen=True)
class GridCell:
    """One point of the cross: its coordinates and the merged request."""

    index: int
    pos: tuple[int, ...]
    coords: dict[str, Any]
    request: PowerRequest | None
    error: str | None = None


def _check_spec(g: GridSpec) -> None:
    problems = []
    if g.quantity not in ("power", "mdes", "sample"):
        problems.append(f"quantity must be 'power', 'mdes', or 'sample', got {g.quantity!r}")
    for name, values in g.varying.items():
        if name not in _PARAM_MAP:
            problems.append(
                f"unknown grid parameter {name!r}; valid names: {', '.join(sorted(_PARAM_MAP))}"
            )
        elif name == "MTP":
            problems.append("MTP cannot vary across a grid; list procedures in the request instead")
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            problems.append(f"grid parameter {name!r} needs a non-empty list of values")
        else:
            for v in values:
                if isinstance(v, (list, tuple, np.ndarray)):
                    problems.append(
                        f"grid parameter {name!r} takes one scalar value per cell, got {v!r}"
                    )
                    break
    if g.quantity == "power":
        if g.goal is not None:
            problems.append("quantity 'power' does not take a goal")
    else:
        if g.goal is None:
            problems.append(f"quantity {g.quantity!r} needs a goal")
        elif g.quantity == "mdes" and g.goal.quantity != "MDES":
            problems.append(f"quantity 'mdes' needs goal.quantity 'MDES', got {g.goal.quantity!r}")
        elif g.quantity == "sample" and g.goal.quantity == "MDES":
            problems.append("quantity 'sample' needs goal.quantity 'nbar', 'J', or 'K'")
    if problems:
        raise DesignError(problems)


def expand_grid(g: GridSpec) -> list[GridCell]:
    """All grid cells in row-major order of the declared parameter sequence.

    The last declared parameter varies fastest.  Cells whose merged request
    fails validation are returned with the failure message instead of being
    dropped, so the caller always sees the full cross.
    """
    _check_spec(g)
    names = list(g.varying)
    shape = [len(g.varying[n]) for n in names]
    cells = []
    total = int(np.prod(shape)) if names else 1
    for index in range(total):
        residue, rev = index, []
        for size in reversed(shape):
            residue, p = divmod(residue, size)
            rev.append(p)
        pos = tuple(reversed(rev))
        coords = {n: g.varying[n][p] for n, p in zip(names, pos)}
        try:
            req = update_request(g.base, coords)
            cells.append(GridCell(index=index, pos=pos, coords=coords, request=req))
        except DesignError as err:
            cells.append(
                GridCell(index=index, pos=pos, coords=coords, request=None, error="; ".join(err.errors))
            )
    return cells


def cell_seed(seed: int, pos: tuple[int, ...]) -> int:
    """Independent seed for the cell at value positions `pos`.

    Keyed on per-parameter positions rather than the flat cell index, so
    appending values to any value list leaves every existing cell's seed
    (and therefore its results) unchanged.  A cell can be reproduced
    directly: pump_power(cell.request, seed=cell_seed(seed, cell.pos))
    equals the corresponding grid rows.
    """
    return int(stream(seed, GRID_STREAM, *pos).integers(0, 2**63 - 1))


@dataclass(frozen=True)
class GridResult:
    """Long-format grid output: one row per cell, MTP, and definition."""

    quantity: str
    varying: tuple[str, ...]
    seed: int
    tnum: int
    rows: tuple[dict[str, Any], ...]

    def to_records(self) -> list[dict[str, Any]]:
        return [dict(r) for r in self.rows]

    def to_frame(self) -> pd.DataFrame:
        columns = list(self.varying) + list(_RESULT_COLUMNS)
        return pd.DataFrame(self.to_records(), columns=columns)

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False)


def _status_row(coords: dict[str, Any], status: str) -> dict[str, Any]:
    return {**coords, "MTP": "", "definition": "", "value": None, "mc_se": None, "status": status}


def _power_rows(cell: GridCell, tnum: int, seed: int) -> list[dict[str, Any]]:
    table = pump_power(replace(cell.request, tnum=tnum), seed=cell_seed(seed, cell.pos))
    rows = []
    for rec in table.to_records():
        rows.append({**cell.coords, **rec, "status": "ok"})
    return rows


def _search_rows(g: GridSpec, cell: GridCell, seed: int) -> list[dict[str, Any]]:
    run = pump_mdes if g.quantity == "mdes" else pump_sample
    try:
        res: SearchResult = run(g.goal, cell.request, seed=cell_seed(seed, cell.pos))
    except DesignError as err:
        return [_status_row(cell.coords, "invalid: " + "; ".join(err.errors))]
    return [
        {
            **cell.coords,
            "MTP": cell.request.mtps[0],
            "definition": g.goal.power_definition,
            "value": res.value,
            "mc_se": res.mc_se,
            "status": "ok" if res.converged else "not converged",
        }
    ]


def run_grid(
    g: GridSpec,
    seed: int | None = None,
    tnum: int | None = None,
    budget_ms: float | None = None,
) -> GridResult:
    """Evaluate every cell of the grid and stack the results long.

    Each cell gets its own derived seed, so results are independent of cell
    order and of which other values appear in the grid.  `budget_ms` is a
    soft cap: cells started before the budget runs out complete normally,
    later ones become "skipped: budget exceeded" rows.
    """
    if seed is None:
        seed = DEFAULT_SEED
    if tnum is None:
        tnum = GRID_TNUM
    cells = expand_grid(g)
    started = time.monotonic()
    rows: list[dict[str, Any]] = []
    for cell in cells:
        if cell.error is not None:
            rows.append(_status_row(cell.coords, "invalid: " + cell.error))
            continue
        if budget_ms is not None and (time.monotonic() - started) * 1000.0 > budget_ms:
            rows.append(_status_row(cell.coords, "skipped: budget exceeded"))
            continue
        if g.quantity == "power":
            rows.extend(_power_rows(cell, tnum, seed))
        else:
            rows.extend(_search_rows(g, cell, seed))
    return GridResult(
        quantity=g.quantity,
        varying=tuple(g.varying),
        seed=seed,
        tnum=tnum,
        rows=tuple(rows),
    )
