"""Single dispatch point shared by the CLI and the HTTP service.

`run` takes a request envelope and returns the response document plus an
exit status.  Responses embed the fully resolved request (defaults filled,
per-outcome parameters broadcast) so any result can be reproduced from the
response body alone.  JSON serialization is canonical: the same envelope
always yields byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.stats import nct, t

from . import __version__, designs
from .designs import DesignError, InfeasibleDesignError
from .dgp import DgpControlParams, assign_treatment, generate_dataset, solve_model_params
from .engine import DEFAULT_B, DEFAULT_TNUM, PowerRequest, pump_power, resolve
from .explore import GRID_TNUM, run_grid
from .models import (
    BODY_MODELS,
    DgpBody,
    GridBody,
    PowerBody,
    RequestEnvelope,
    SearchBody,
    ValidateBody,
)
from .mtp import MTPS, MtpError
from .oracle import oracle_power, scheme_for
from .search import pump_mdes, pump_sample
from .seeding import DEFAULT_SEED

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3

_VALIDATION_ERRORS = (DesignError, MtpError, InfeasibleDesignError, ValidationError)


class ComputationError(RuntimeError):
    """The request was valid but the computation could not produce a result."""


@dataclass(frozen=True)
class RunResult:
    """Response document plus transport hints."""

    payload: dict[str, Any]
    output: str
    exit_code: int
    text: str

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def canonical_json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ": "), indent=1)


def _known_field(token: str) -> str | None:
    known = {
        "design", "M", "nbar", "Tbar", "J", "K", "alpha", "MDES", "numZero",
        "MTP", "rho", "tnum", "B", "S", "quantity", "target_power",
        "power_definition",
    }
    known.update(f"{stem}.{i}" for stem in ("numCovar", "R2", "ICC", "omega") for i in (1, 2, 3))
    token = token.strip().rstrip(":")
    return token if token in known else None


def error_payload(kind: str, err: Exception) -> dict[str, Any]:
    if isinstance(err, ValidationError):
        fields = [
            {
                "path": ".".join(str(part) for part in item["loc"]),
                "message": item["msg"],
            }
            for item in err.errors()
        ]
        messages = [f"{f['path']}: {f['message']}" if f["path"] else f["message"] for f in fields]
    else:
        messages = list(getattr(err, "errors", None) or [str(err)])
        fields = []
        for message in messages:
            field = _known_field(message.split(" ", 1)[0])
            fields.append({"path": field, "message": message})
    kind_label = "validation" if isinstance(err, _VALIDATION_ERRORS) else "computation"
    return {
        "kind": kind,
        "error": {"type": kind_label, "messages": messages, "fields": fields},
    }


def _engine_stamp() -> dict[str, Any]:
    return {"name": "pump", "version": __version__}


def resolved_power_body(req: PowerRequest) -> dict[str, Any]:
    """The request as actually run: defaults applied, vectors broadcast."""
    params, effects, rho, _, _ = resolve(req)

    def vec(value: Any) -> list[float]:
        return [float(v) for v in np.atleast_1d(np.asarray(value, dtype=float))]

    out: dict[str, Any] = {
        "design": req.design,
        "M": int(params.M),
        "nbar": float(params.nbar),
        "Tbar": float(params.Tbar),
        "alpha": float(params.alpha),
        "two.sided": bool(params.two_sided),
        "MDES": vec(effects.MDES),
        "numZero": int(effects.numZero),
        "MTP": list(req.mtps),
        "rho": [[float(v) for v in row] for row in rho],
        "tnum": int(req.tnum),
        "B": int(req.B),
    }
    if params.J is not None:
        out["J"] = float(params.J)
    if params.K is not None:
        out["K"] = float(params.K)
    for i in (1, 2, 3):
        out[f"numCovar.{i}"] = int(getattr(params, f"numCovar_{i}"))
    for stem in ("R2", "ICC", "omega"):
        for i in (1, 2, 3):
            attr = f"{stem}_{i}"
            if hasattr(params, attr):
                out[f"{stem}.{i}"] = vec(getattr(params, attr))
    return out


def _goal_body(goal_model: Any) -> dict[str, Any]:
    return goal_model.model_dump(by_alias=True)


def _run_power(body: PowerBody, seed: int) -> dict[str, Any]:
    req = body.to_request()
    table = pump_power(req, seed=seed)
    return {
        "request": resolved_power_body(req),
        "result": {
            "df": float(table.df),
            "Q": [float(q) for q in np.atleast_1d(table.Q)],
            "shift": [float(s) for s in np.atleast_1d(table.shift)],
            "B": None if table.B is None else int(table.B),
            "table": table.to_records(),
        },
    }


def _run_search(kind: str, body: SearchBody, seed: int) -> dict[str, Any]:
    req = body.base.to_request()
    goal = body.goal.to_goal()
    runner = pump_mdes if kind == "mdes" else pump_sample
    result = runner(goal, req, seed=seed)
    return {
        "request": {"base": resolved_power_body(req), "goal": _goal_body(body.goal)},
        "result": result.to_dict(),
    }


def _run_grid(body: GridBody, seed: int, budget_ms: float | None) -> dict[str, Any]:
    spec = body.to_spec()
    result = run_grid(spec, seed=seed, tnum=body.tnum, budget_ms=budget_ms)
    request = {
        "base": body.base.model_dump(by_alias=True),
        "varying": body.varying,
        "quantity": body.quantity,
        "tnum": result.tnum,
    }
    if body.goal is not None:
        request["goal"] = _goal_body(body.goal)
    if budget_ms is not None:
        request["budget_ms"] = float(budget_ms)
    return {"request": request, "result": {"rows": result.to_records()}}


def _closed_form_power(req: PowerRequest) -> float | None:
    params, effects, _, Q, df = resolve(req)
    if params.M != 1:
        return None
    shift = float(np.atleast_1d(effects.MDES / Q)[0])
    if params.two_sided:
        crit = t.ppf(1.0 - params.alpha / 2.0, df)
        return float(nct.sf(crit, df, shift) + nct.cdf(-crit, df, shift))
    crit = t.ppf(1.0 - params.alpha, df)
    return float(nct.sf(crit, df, shift))


def _run_validate(body: ValidateBody, seed: int) -> dict[str, Any]:
    base = body.base
    req = base.to_request()
    params, effects, _, _, _ = resolve(req)
    if not isinstance(base.rho, (int, float)):
        raise DesignError(["validate requires a scalar rho"])
    for name in ("nbar", "J", "K"):
        value = getattr(params, name)
        if value is not None and float(value) != int(value):
            raise DesignError([f"validate requires integer {name}, got {value}"])
    mdes = np.atleast_1d(np.asarray(effects.MDES, dtype=float))
    controls = DgpControlParams(
        M=params.M,
        nbar=int(params.nbar),
        J=int(params.J) if params.J is not None else 1,
        K=int(params.K) if params.K is not None else 1,
        Tbar=params.Tbar,
        ES=mdes,
        ICC_2=np.asarray(params.ICC_2, dtype=float),
        ICC_3=np.asarray(params.ICC_3, dtype=float),
        omega_2=np.asarray(params.omega_2, dtype=float),
        omega_3=np.asarray(params.omega_3, dtype=float),
        R2_1=np.asarray(params.R2_1, dtype=float),
        R2_2=np.asarray(params.R2_2, dtype=float),
        R2_3=np.asarray(params.R2_3, dtype=float),
        rho=float(base.rho),
    )
    table = pump_power(req, seed=seed)
    reference = oracle_power(
        req.design, controls, mtps=req.mtps, S=body.S, alpha=params.alpha,
        two_sided=params.two_sided, B=body.oracle_B, seed=seed,
    )
    closed = _closed_form_power(req)
    bound = reference.ci_halfwidth
    rows = []
    for mtp in req.mtps:
        engine_row = table.row(mtp)
        reference_row = reference.row(mtp)
        for definition, engine_value in engine_row.power.items():
            reference_value = reference_row.power.get(definition)
            if reference_value is None:
                continue
            diff = engine_value - reference_value
            rows.append(
                {
                    "MTP": mtp,
                    "definition": definition,
                    "engine": engine_value,
                    "reference": reference_value,
                    "diff": diff,
                    "bound": bound,
                    "pass": bool(abs(diff) <= bound),
                }
            )
    return {
        "request": {"base": resolved_power_body(req), "S": body.S, "oracle_B": body.oracle_B},
        "result": {
            "rows": rows,
            "pass": bool(all(r["pass"] for r in rows)),
            "closed_form_power": closed,
            "S": body.S,
            "ci_halfwidth": bound,
        },
    }


def _run_dgp(body: DgpBody, seed: int) -> dict[str, Any]:
    if body.design not in designs.DESIGNS:
        raise DesignError(
            [f"unknown design {body.design!r}; valid codes: {', '.join(designs.DESIGNS)}"]
        )
    raw = np.atleast_1d(np.asarray(body.MDES, dtype=float))
    if raw.size not in (1, body.M):
        raise DesignError([f"MDES must be a scalar or length-{body.M} vector"])
    mdes = np.broadcast_to(raw, (body.M,)).copy()
    if not 0 <= body.numZero <= body.M:
        raise DesignError([f"numZero must be in [0, {body.M}], got {body.numZero}"])
    if body.numZero:
        mdes[body.M - body.numZero:] = 0.0
    controls = DgpControlParams(
        M=body.M, nbar=body.nbar, J=body.J, K=body.K, Tbar=body.Tbar,
        ES=mdes,
        ICC_2=_np(body.ICC_2), ICC_3=_np(body.ICC_3),
        omega_2=_np(body.omega_2), omega_3=_np(body.omega_3),
        R2_1=_np(body.R2_1), R2_2=_np(body.R2_2), R2_3=_np(body.R2_3),
        rho=body.rho, kappa_w=body.kappa_w, kappa_u=body.kappa_u,
    )
    model = solve_model_params(controls)
    ds = generate_dataset(model, controls, seed)
    scheme = scheme_for(body.design)
    T = assign_treatment(scheme, body.K, body.J, body.nbar, body.Tbar, seed)
    frame = ds.with_assignment(T).to_frame()
    return {
        "request": body.model_dump(by_alias=True),
        "result": {
            "scheme": scheme,
            "n_rows": int(len(frame)),
            "columns": list(frame.columns),
            "rows": frame.to_dict(orient="records"),
        },
        "_frame": frame,
    }


def _np(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=float)


def _to_csv(kind: str, payload: dict[str, Any], frame: pd.DataFrame | None) -> str:
    if kind == "power":
        return pd.DataFrame(
            payload["result"]["table"], columns=["MTP", "definition", "value", "mc_se"]
        ).to_csv(index=False)
    if kind == "grid":
        varying = list(payload["request"]["varying"])
        columns = varying + ["MTP", "definition", "value", "mc_se", "status"]
        return pd.DataFrame(payload["result"]["rows"], columns=columns).to_csv(index=False)
    if kind == "dgp":
        assert frame is not None
        return frame.to_csv(index=False)
    raise DesignError([f"output 'csv' is not available for kind {kind!r}"])


def info_payload() -> dict[str, Any]:
    return {
        "engine": _engine_stamp(),
        "designs": designs.design_info(),
        "mtps": list(MTPS),
        "defaults": {
            "alpha": 0.05,
            "tnum": DEFAULT_TNUM,
            "B": DEFAULT_B,
            "grid_tnum": GRID_TNUM,
            "seed": DEFAULT_SEED,
        },
        "power_definitions": ["D1indiv..DMindiv", "mean", "min1..min(M-1)", "complete"],
    }


def schema_payload() -> dict[str, Any]:
    return {
        "envelope": RequestEnvelope.model_json_schema(),
        "bodies": {kind: model.model_json_schema() for kind, model in BODY_MODELS.items()},
    }


def run(env: RequestEnvelope) -> RunResult:
    """Validate, dispatch, and serialize one envelope."""
    seed = DEFAULT_SEED if env.seed is None else int(env.seed)
    try:
        if env.output == "csv" and env.kind not in ("power", "grid", "dgp"):
            raise DesignError([f"output 'csv' is not available for kind {env.kind!r}"])
        model = BODY_MODELS[env.kind].model_validate(env.body)
        if env.kind == "power":
            document = _run_power(model, seed)
        elif env.kind in ("mdes", "sample"):
            document = _run_search(env.kind, model, seed)
        elif env.kind == "grid":
            document = _run_grid(model, seed, env.budget_ms)
        elif env.kind == "validate":
            document = _run_validate(model, seed)
        else:
            document = _run_dgp(model, seed)
    except _VALIDATION_ERRORS as err:
        payload = error_payload(env.kind, err)
        return RunResult(payload, "json", EXIT_VALIDATION, canonical_json(payload))
    except (ComputationError, FloatingPointError, np.linalg.LinAlgError) as err:
        payload = error_payload(env.kind, err)
        return RunResult(payload, "json", EXIT_NO_CONVERGENCE, canonical_json(payload))

    frame = document.pop("_frame", None)
    payload = {
        "kind": env.kind,
        "engine": _engine_stamp(),
        "seed": seed,
        **document,
    }
    exit_code = EXIT_OK
    if env.kind in ("mdes", "sample") and not payload["result"]["converged"]:
        exit_code = EXIT_NO_CONVERGENCE
    if env.output == "csv":
        text = _to_csv(env.kind, payload, frame)
    else:
        text = canonical_json(payload)
    return RunResult(payload, env.output, exit_code, text)
