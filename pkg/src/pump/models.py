"""Request and response schemas for the service and CLI.

Field names in JSON follow the external spellings (dotted variance
parameters, MDES, MTP); Python attribute names use underscores.  Bodies
only check shape and type here; design-specific rules run in the core
validators so CLI, service, and library callers all see the same errors.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .designs import DesignParams, EffectSpec
from .engine import DEFAULT_B, DEFAULT_TNUM, PowerRequest
from .explore import GridSpec
from .search import SearchGoal

Scalar = float | int
PerOutcome = float | list[float]


class _Body(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")


class PowerBody(_Body):
    """One power question, flat, in external spellings."""

    design: str
    M: int = 1
    nbar: float
    Tbar: float = 0.5
    J: float | None = None
    K: float | None = None
    numCovar_1: int = Field(default=0, alias="numCovar.1")
    numCovar_2: int = Field(default=0, alias="numCovar.2")
    numCovar_3: int = Field(default=0, alias="numCovar.3")
    R2_1: PerOutcome = Field(default=0.0, alias="R2.1")
    R2_2: PerOutcome = Field(default=0.0, alias="R2.2")
    R2_3: PerOutcome = Field(default=0.0, alias="R2.3")
    ICC_2: PerOutcome = Field(default=0.0, alias="ICC.2")
    ICC_3: PerOutcome = Field(default=0.0, alias="ICC.3")
    omega_2: PerOutcome = Field(default=0.0, alias="omega.2")
    omega_3: PerOutcome = Field(default=0.0, alias="omega.3")
    alpha: float = 0.05
    two_sided: bool = Field(default=True, alias="two.sided")
    MDES: PerOutcome = 0.0
    numZero: int = 0
    MTP: str | list[str] = "None"
    rho: float | list[list[float]] = 0.0
    tnum: int = DEFAULT_TNUM
    B: int = DEFAULT_B

    def to_request(self) -> PowerRequest:
        mtps = (self.MTP,) if isinstance(self.MTP, str) else tuple(self.MTP)
        params = DesignParams(
            M=self.M, nbar=self.nbar, Tbar=self.Tbar, J=self.J, K=self.K,
            numCovar_1=self.numCovar_1, numCovar_2=self.numCovar_2,
            numCovar_3=self.numCovar_3,
            R2_1=_vec(self.R2_1), R2_2=_vec(self.R2_2), R2_3=_vec(self.R2_3),
            ICC_2=_vec(self.ICC_2), ICC_3=_vec(self.ICC_3),
            omega_2=_vec(self.omega_2), omega_3=_vec(self.omega_3),
            alpha=self.alpha, two_sided=self.two_sided,
        )
        effects = EffectSpec(MDES=_vec(self.MDES), numZero=self.numZero)
        return PowerRequest(
            design=self.design, params=params, effects=effects, mtps=mtps,
            rho=self.rho, tnum=self.tnum, B=self.B,
        )


def _vec(value: PerOutcome) -> Any:
    return tuple(value) if isinstance(value, list) else value


class GoalBody(_Body):
    """Search target and effort settings for MDES and sample-size runs."""

    target_power: float
    power_definition: str
    quantity: Literal["MDES", "nbar", "J", "K"] = "MDES"
    tol: float = 0.01
    start_tnum: int = 1000
    tnum: int = 3000
    final_tnum: int = 20_000
    max_steps: int = 30

    def to_goal(self) -> SearchGoal:
        return SearchGoal(
            quantity=self.quantity,
            power_definition=self.power_definition,
            target_power=self.target_power,
            tol=self.tol,
            start_tnum=self.start_tnum,
            tnum=self.tnum,
            final_tnum=self.final_tnum,
            max_steps=self.max_steps,
        )


class SearchBody(_Body):
    """A power body plus the goal to solve for."""

    base: PowerBody
    goal: GoalBody


class GridBody(_Body):
    """A base scenario crossed over lists of scalar parameter values."""

    base: PowerBody
    varying: dict[str, list[Any]]
    quantity: Literal["power", "mdes", "sample"] = "power"
    goal: GoalBody | None = None
    tnum: int | None = None

    def to_spec(self) -> GridSpec:
        return GridSpec(
            base=self.base.to_request(),
            varying={k: list(v) for k, v in self.varying.items()},
            quantity=self.quantity,
            goal=self.goal.to_goal() if self.goal is not None else None,
        )


class ValidateBody(_Body):
    """Cross-check settings: same scenario run by the engine and by a
    simulated-data reference analysis."""

    base: PowerBody
    S: int = 500
    oracle_B: int = 2000


class DgpBody(_Body):
    """Synthetic dataset request in the same external spellings."""

    design: str
    M: int = 1
    nbar: int
    J: int = 1
    K: int = 1
    Tbar: float = 0.5
    MDES: PerOutcome = 0.0
    numZero: int = 0
    R2_1: PerOutcome = Field(default=0.0, alias="R2.1")
    R2_2: PerOutcome = Field(default=0.0, alias="R2.2")
    R2_3: PerOutcome = Field(default=0.0, alias="R2.3")
    ICC_2: PerOutcome = Field(default=0.0, alias="ICC.2")
    ICC_3: PerOutcome = Field(default=0.0, alias="ICC.3")
    omega_2: PerOutcome = Field(default=0.0, alias="omega.2")
    omega_3: PerOutcome = Field(default=0.0, alias="omega.3")
    rho: float = 0.0
    kappa_w: float = 0.0
    kappa_u: float = 0.0


class RequestEnvelope(_Body):
    """Self-contained unit of work: what to run, on what, with which seed."""

    kind: Literal["power", "mdes", "sample", "grid", "validate", "dgp"]
    body: dict[str, Any]
    seed: int | None = None
    output: Literal["json", "csv"] = "json"
    budget_ms: float | None = None


BODY_MODELS: dict[str, type[_Body]] = {
    "power": PowerBody,
    "mdes": SearchBody,
    "sample": SearchBody,
    "grid": GridBody,
    "validate": ValidateBody,
    "dgp": DgpBody,
}
