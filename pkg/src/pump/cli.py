"""Command-line front end: thin client over the same dispatch as the service.

Each verb assembles a request envelope from an optional JSON config file,
dedicated flags, and generic `--set key=value` overrides (applied in that
order, so later sources win), runs it in process, and prints the response.
Exit codes: 0 success, 2 validation error, 3 non-convergence.
"""

from __future__ import annotations

import json
import sys
from typing import Any

import click

from .interface import canonical_json, info_payload, run
from .models import RequestEnvelope

# Verbs whose design parameters live under a "base" sub-object.
_NESTED = ("mdes", "sample", "grid", "validate")

_GOAL_KEYS = (
    "target_power", "power_definition", "quantity", "tol",
    "start_tnum", "tnum", "final_tnum", "max_steps",
)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _split_assignment(item: str) -> tuple[str, Any]:
    if "=" not in item:
        raise click.UsageError(f"expected key=value, got {item!r}")
    key, _, raw = item.partition("=")
    return key.strip(), _parse_value(raw.strip())


# Keys that live at the body root for each nested verb; anything else names
# a design parameter and lands under "base".
_ROOT_KEYS = {
    "mdes": {"base", "goal"},
    "sample": {"base", "goal"},
    "grid": {"base", "goal", "varying", "quantity", "tnum"},
    "validate": {"base", "S", "oracle_B"},
}


def _section(body: dict[str, Any], kind: str, key: str) -> tuple[dict[str, Any], str]:
    """Where a bare parameter name lands for this verb."""
    if key.startswith("goal."):
        return body.setdefault("goal", {}), key[len("goal."):]
    if key.startswith("base."):
        return body.setdefault("base", {}), key[len("base."):]
    if kind in _NESTED and key not in _ROOT_KEYS[kind]:
        return body.setdefault("base", {}), key
    return body, key


def _assemble(
    kind: str,
    config: str | None,
    sets: tuple[str, ...],
    flag_params: dict[str, Any],
    goal_params: dict[str, Any] | None = None,
) -> dict[str, Any]:
    body: dict[str, Any] = {}
    if config is not None:
        with open(config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise click.UsageError(f"config {config!r} must hold a JSON object")
        # flat scenario files work for every verb: design parameters are
        # routed under "base" where the verb expects them there
        for key, value in loaded.items():
            section, name = _section(body, kind, key)
            section[name] = value
    for key, value in flag_params.items():
        if value is None or value == ():
            continue
        section, name = _section(body, kind, key)
        section[name] = value
    if goal_params:
        goal = body.setdefault("goal", {})
        for key, value in goal_params.items():
            if value is not None:
                goal[key] = value
    for item in sets:
        key, value = _split_assignment(item)
        section, name = _section(body, kind, key)
        section[name] = value
    return body


def _emit(kind: str, body: dict[str, Any], seed: int | None, fmt: str,
          out: str | None, budget_ms: float | None = None) -> None:
    env = RequestEnvelope(kind=kind, body=body, seed=seed, output=fmt, budget_ms=budget_ms)
    result = run(env)
    if result.ok:
        if out is not None:
            with open(out, "w") as fh:
                fh.write(result.text)
                if not result.text.endswith("\n"):
                    fh.write("\n")
        else:
            click.echo(result.text)
    else:
        click.echo(result.text, err=True)
    sys.exit(result.exit_code)


def _common(fn):
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="JSON file with the request body.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override any body field; repeatable; JSON values allowed.")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None,
                      help="Write the response here instead of stdout.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                      default="json", show_default=True)(fn)
    return fn


def _design_flags(fn):
    fn = click.option("--design", default=None)(fn)
    fn = click.option("-M", "--M", "M", type=int, default=None)(fn)
    fn = click.option("--nbar", type=float, default=None)(fn)
    fn = click.option("-J", "--J", "J", type=float, default=None)(fn)
    fn = click.option("-K", "--K", "K", type=float, default=None)(fn)
    fn = click.option("--Tbar", "Tbar", type=float, default=None)(fn)
    fn = click.option("--MDES", "MDES", default=None,
                      help="Scalar or JSON list, e.g. 0.125 or [0.1,0,0].")(fn)
    fn = click.option("--numZero", "numZero", type=int, default=None)(fn)
    fn = click.option("--MTP", "MTP", multiple=True,
                      help="Repeatable: --MTP BF --MTP WY-SD.")(fn)
    fn = click.option("--rho", default=None, help="Scalar or JSON matrix.")(fn)
    fn = click.option("--alpha", type=float, default=None)(fn)
    fn = click.option("--tnum", type=int, default=None)(fn)
    fn = click.option("-B", "--B", "B", type=int, default=None)(fn)
    return fn


def _collect_design(design, M, nbar, J, K, Tbar, MDES, numZero, MTP, rho, alpha, tnum, B):
    return {
        "design": design, "M": M, "nbar": nbar, "J": J, "K": K, "Tbar": Tbar,
        "MDES": _parse_value(MDES) if isinstance(MDES, str) else MDES,
        "numZero": numZero, "MTP": list(MTP) if MTP else None,
        "rho": _parse_value(rho) if isinstance(rho, str) else rho,
        "alpha": alpha, "tnum": tnum, "B": B,
    }


def _goal_flags(fn):
    fn = click.option("--target-power", type=float, default=None)(fn)
    fn = click.option("--definition", "power_definition", default=None,
                      help="Power definition, e.g. D1indiv, min1, complete.")(fn)
    fn = click.option("--tol", type=float, default=None)(fn)
    return fn


@click.group()
@click.version_option(package_name="pump")
def main() -> None:
    """Power, MDES, and sample-size estimation for multilevel trials
    with multiple outcomes."""


@main.command()
@_common
@_design_flags
def power(config, sets, seed, out, fmt, **params) -> None:
    """Estimate a power table for one scenario."""
    body = _assemble("power", config, sets, _collect_design(**params))
    _emit("power", body, seed, fmt, out)


@main.command()
@_common
@_design_flags
@_goal_flags
def mdes(config, sets, seed, out, fmt, target_power, power_definition, tol, **params) -> None:
    """Smallest detectable effect size for a target power."""
    goal = {"target_power": target_power, "power_definition": power_definition,
            "tol": tol, "quantity": "MDES"}
    body = _assemble("mdes", config, sets, _collect_design(**params), goal)
    _emit("mdes", body, seed, fmt, out)


@main.command()
@_common
@_design_flags
@_goal_flags
@click.option("--quantity", type=click.Choice(["nbar", "J", "K"]), default=None)
def sample(config, sets, seed, out, fmt, target_power, power_definition, tol,
           quantity, **params) -> None:
    """Smallest sample size at one level for a target power."""
    goal = {"target_power": target_power, "power_definition": power_definition,
            "tol": tol, "quantity": quantity}
    body = _assemble("sample", config, sets, _collect_design(**params), goal)
    _emit("sample", body, seed, fmt, out)


@main.command()
@_common
@_design_flags
@click.option("--vary", "varies", multiple=True, metavar="NAME=JSON_LIST",
              help='Repeatable: --vary "ICC.2=[0,0.1,0.2]".')
@click.option("--quantity", type=click.Choice(["power", "mdes", "sample"]), default=None)
@click.option("--grid-tnum", type=int, default=None,
              help="Replaces every cell's tnum (grids default to a reduced count).")
@click.option("--budget-ms", type=float, default=None,
              help="Soft time cap; cells past it come back as skipped rows.")
def grid(config, sets, seed, out, fmt, varies, quantity, grid_tnum, budget_ms, **params) -> None:
    """Sweep parameters over value lists and stack all results."""
    body = _assemble("grid", config, sets, _collect_design(**params))
    if varies:
        varying = body.setdefault("varying", {})
        for item in varies:
            key, value = _split_assignment(item)
            if not isinstance(value, list):
                raise click.UsageError(f"--vary {key} needs a JSON list, got {value!r}")
            varying[key] = value
    if quantity is not None:
        body["quantity"] = quantity
    if grid_tnum is not None:
        body["tnum"] = grid_tnum
    _emit("grid", body, seed, fmt, out, budget_ms)


@main.command()
@_common
@_design_flags
@click.option("-S", "--draws", "S", type=int, default=None,
              help="Simulated datasets for the reference analysis.")
def validate(config, sets, seed, out, fmt, S, **params) -> None:
    """Re-run a scenario on simulated data and compare against the engine."""
    body = _assemble("validate", config, sets, _collect_design(**params))
    if S is not None:
        body["S"] = S
    _emit("validate", body, seed, fmt, out)


@main.command()
@_common
@click.option("--design", default=None)
@click.option("-M", "--M", "M", type=int, default=None)
@click.option("--nbar", type=int, default=None)
@click.option("-J", "--J", "J", type=int, default=None)
@click.option("-K", "--K", "K", type=int, default=None)
@click.option("--Tbar", "Tbar", type=float, default=None)
@click.option("--MDES", "MDES", default=None)
@click.option("--numZero", "numZero", type=int, default=None)
@click.option("--rho", type=float, default=None)
def dgp(config, sets, seed, out, fmt, **params) -> None:
    """Generate one synthetic dataset for a design."""
    if isinstance(params.get("MDES"), str):
        params["MDES"] = _parse_value(params["MDES"])
    body = _assemble("dgp", config, sets, params)
    _emit("dgp", body, seed, fmt, out)


@main.command()
def info() -> None:
    """Supported designs, adjustment procedures, and defaults."""
    click.echo(canonical_json(info_payload()))
