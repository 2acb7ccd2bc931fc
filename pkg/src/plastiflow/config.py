"""Run configuration: strict JSON schema, u0 construction, hashing.

A config is a JSON object with blocks problem / parameters / solver /
game / analysis / output.  Unknown keys anywhere are rejected; "auto"
requests the CFL-limited time step or the dimensional clock constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .exact import Tiling, eigenpair, separable_profile
from .evolve import ELASTO_PLASTIC, cfl_limit
from .grids import Domain, GridFunction, Parameters, build_domain

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "minimum": np.minimum,
    "maximum": np.maximum, "where": np.where, "pi": math.pi, "e": math.e,
}


def _require_keys(block: dict, allowed: dict, path: str) -> dict:
    """Check presence/absence of keys; allowed maps key -> required flag."""
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for key, required in allowed.items():
        if required and key not in block:
            raise ConfigError(f"{path}: missing required key '{key}'")
    return block


def _number(block: dict, key: str, path: str, positive: bool = False, default=None):
    if key not in block:
        return default
    v = block[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {v}")
    return float(v)


@dataclass
class RunConfig:
    raw: dict
    domain: Domain
    params: Parameters
    u0_spec: dict
    solver: dict
    game: dict
    analysis: dict
    output: dict

    def u0(self) -> GridFunction:
        return build_u0(self.u0_spec, self.domain, self.params)

    def scheme_dt(self, kind: str = ELASTO_PLASTIC, layer_coeff: float = 1.0) -> float:
        dt = self.solver.get("dt", "auto")
        if dt == "auto":
            return cfl_limit(self.domain.h, self.params, self.domain.ndim,
                             kind, layer_coeff)
        return float(dt)


def build_u0(spec: dict, domain: Domain, params: Parameters) -> GridFunction:
    kind = spec.get("kind")
    if kind == "eigen":
        return eigenpair(domain).phi
    if kind in ("separable", "tiled"):
        theta = spec.get("theta", params.theta)
        variant = None
        if kind == "tiled":
            variant = Tiling(int(spec["m"]), int(spec["j"]))
        profile = separable_profile(float(theta), variant,
                                    b_minus=params.b_minus)
        return profile.on_grid(domain)
    if kind == "csv":
        return load_grid_function_csv(Path(spec["path"]), domain)
    if kind == "expression":
        return expression_u0(spec["formula"], domain)
    raise ConfigError(f"unknown u0 kind {kind!r}")


def expression_u0(formula: str, domain: Domain) -> GridFunction:
    names = dict(_EXPR_NAMES)
    if domain.ndim == 1:
        names["x"] = domain.axes[0]
    else:
        names["x"], names["y"] = domain.coords()
    try:
        vals = eval(formula, {"__builtins__": {}}, names)  # noqa: S307 - restricted namespace
    except Exception as exc:
        raise ConfigError(f"bad u0 expression {formula!r}: {exc}") from exc
    vals = np.asarray(vals, dtype=float)
    vals = np.broadcast_to(vals, domain.shape).copy()
    vals[domain.boundary_mask] = 0.0
    return GridFunction(domain, vals)


def load_grid_function_csv(path: Path, domain: Domain) -> GridFunction:
    rows = [ln for ln in path.read_text().splitlines()
            if ln and not ln.startswith(("#", "x"))]
    vals = np.array([float(r.split(",")[-1]) for r in rows])
    if vals.size != domain.n_nodes:
        raise ConfigError(f"{path}: {vals.size} rows, grid has {domain.n_nodes} nodes")
    return GridFunction(domain, vals.reshape(domain.shape))


_U0_KEYS = {"kind": True, "theta": False, "m": False, "j": False,
            "path": False, "formula": False}


def parse_config(obj: dict) -> RunConfig:
    _require_keys(obj, {"problem": True, "parameters": True, "solver": False,
                        "game": False, "analysis": False, "output": False},
                  "config")
    problem = _require_keys(obj["problem"], {"domain": True, "u0": True}, "problem")
    dom_spec = _require_keys(problem["domain"],
                             {"kind": True, "extent": True}, "problem.domain")
    params_block = _require_keys(obj["parameters"],
                                 {"b_minus": True, "b_plus": True}, "parameters")
    solver = _require_keys(obj.get("solver", {}),
                           {"h": False, "dt": False, "T": False, "stride": False,
                            "layer_coeff": False}, "solver")
    game = _require_keys(obj.get("game", {}),
                         {"epsilon": False, "C": False, "K": False, "n": False,
                          "seed": False, "start": False, "strategy": False,
                          "a": False, "boundary_point": False, "delta_t": False},
                         "game")
    analysis = _require_keys(obj.get("analysis", {}),
                             {"window": False, "bracket": False,
                              "tol_theta": False, "budget": False,
                              "thetas": False, "times": False,
                              "b_minus_list": False, "b_plus_list": False},
                             "analysis")
    output = _require_keys(obj.get("output", {}),
                           {"directory": False, "formats": False}, "output")
    _require_keys(problem["u0"], _U0_KEYS, "problem.u0")

    b_minus = _number(params_block, "b_minus", "parameters", positive=True)
    b_plus = _number(params_block, "b_plus", "parameters", positive=True)
    params = Parameters(b_minus, b_plus)

    h = _number(solver, "h", "solver", positive=True, default=None)
    if h is None:
        raise ConfigError("solver.h is required")
    kind = dom_spec["kind"]
    if kind not in ("interval", "rectangle"):
        raise ConfigError(f"problem.domain.kind: unknown kind {kind!r}")
    extent = dom_spec["extent"]
    domain = build_domain(kind, extent, h)

    dt = solver.get("dt", "auto")
    if dt != "auto":
        _number(solver, "dt", "solver", positive=True)
    fmts = output.get("formats", ["csv", "json"])
    bad = set(fmts) - {"csv", "json", "svg"}
    if bad:
        raise ConfigError(f"output.formats: unknown formats {sorted(bad)}")

    return RunConfig(obj, domain, params, problem["u0"], solver, game,
                     analysis, output)


def load_config(path: Path) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(obj)
