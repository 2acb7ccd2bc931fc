"""Explicit finite-difference evolution for the two-coefficient heat law.

The equation is stepped in its optimal-control form: where the discrete
Laplacian is nonnegative the field relaxes with coefficient b_plus, where
it is negative with b_minus.  The degenerate layer form c * du/dt =
min(Lap u, 0) shares the same stepper.  Forward Euler is used throughout:
it is monotone under the CFL bound, which is what makes the comparison
properties of the continuum problem carry over to the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlowUp,
    CflViolation,
    CompatibilityError,
    SnapshotMissing,
)
from .exact import EigenPair, eigenpair, heat_series
from .grids import (
    Domain,
    GridFunction,
    Parameters,
    laplacian_array,
    trapezoid_weights,
)
from .obstacle import project_initial

CFL_SAFETY = 0.9
BOUNDARY_TOL = 1e-12

ELASTO_PLASTIC = "elasto_plastic"
LAYER = "layer"


def cfl_limit(h: float, params: Parameters, ndim: int,
              kind: str = ELASTO_PLASTIC, layer_coeff: float = 1.0) -> float:
    """Largest stable dt (safety factor included, worst branch)."""
    if kind == ELASTO_PLASTIC:
        coeff = min(params.b_minus, params.b_plus)
    elif kind == LAYER:
        coeff = layer_coeff
    else:
        raise ValueError(f"unknown scheme kind {kind!r}")
    if coeff <= 0:
        raise ValueError("layer coefficient must be positive")
    return CFL_SAFETY * h * h * coeff / (2.0 * ndim)


@dataclass
class SchemeConfig:
    params: Parameters
    dt: float
    t_final: float
    kind: str = ELASTO_PLASTIC
    layer_coeff: float = 1.0
    stride: int = 1

    def validate(self, domain: Domain):
        if self.dt <= 0 or self.t_final <= 0:
            raise CflViolation("dt and t_final must be positive")
        if self.stride < 1:
            raise ValueError("snapshot stride must be >= 1")
        limit = cfl_limit(domain.h, self.params, domain.ndim,
                          self.kind, self.layer_coeff)
        if self.dt > limit * (1.0 + 1e-12):
            raise CflViolation(
                f"dt={self.dt:g} exceeds stability bound {limit:g}")


def auto_config(domain: Domain, params: Parameters, t_final: float,
                kind: str = ELASTO_PLASTIC, layer_coeff: float = 1.0,
                stride: int | None = None) -> SchemeConfig:
    dt = cfl_limit(domain.h, params, domain.ndim, kind, layer_coeff)
    if stride is None:
        steps = max(1, int(math.ceil(t_final / dt)))
        stride = max(1, steps // 200)
    return SchemeConfig(params, dt, t_final, kind, layer_coeff, stride)


def ep_rhs_array(values: np.ndarray, h: float, b_minus: float, b_plus: float) -> np.ndarray:
    """Sign-rule right-hand side: Lap/b_plus where Lap >= 0, else Lap/b_minus.

    Equals min(Lap/b_minus, Lap/b_plus) when b_plus > b_minus and the max
    otherwise; the tie Lap = 0 lands on the b_plus branch (value 0 either
    way).
    """
    lap = laplacian_array(values, h)
    return np.where(lap >= 0.0, lap / b_plus, lap / b_minus)


def ep_rhs(u: GridFunction, p: Parameters) -> GridFunction:
    return u.with_values(ep_rhs_array(u.values, u.domain.h, p.b_minus, p.b_plus), u.time)


def layer_rhs_array(values: np.ndarray, h: float, coeff: float = 1.0) -> np.ndarray:
    lap = laplacian_array(values, h)
    return np.minimum(lap, 0.0) / coeff


def layer_rhs(u: GridFunction, coeff: float = 1.0) -> GridFunction:
    if coeff <= 0:
        raise ValueError("layer coefficient must be positive")
    return u.with_values(layer_rhs_array(u.values, u.domain.h, coeff), u.time)


SIGN_NONNEG = "all-nonneg"
SIGN_NONPOS = "all-nonpos"
SIGN_MIXED = "mixed"


def sign_pattern(values: np.ndarray) -> str:
    lo, hi = float(values.min()), float(values.max())
    if lo >= 0.0:
        return SIGN_NONNEG
    if hi <= 0.0:
        return SIGN_NONPOS
    return SIGN_MIXED


@dataclass
class Solution:
    """Snapshots of one evolution plus per-snapshot diagnostics."""

    params: Parameters
    domain: Domain
    times: np.ndarray
    fields: np.ndarray            # shape (n_snapshots,) + domain.shape
    sup_norms: np.ndarray
    infs: np.ndarray
    projections: np.ndarray       # trapezoid integral of u * phi
    sign_patterns: list[str]
    eigen: EigenPair

    def snapshot(self, t: float, tol: float = 1e-9) -> GridFunction:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > tol:
            raise SnapshotMissing(f"no snapshot at t={t}")
        return GridFunction(self.domain, self.fields[idx].copy(), float(self.times[idx]))

    def snapshot_at_index(self, idx: int) -> GridFunction:
        return GridFunction(self.domain, self.fields[idx].copy(), float(self.times[idx]))

    def value_at_time(self, t: float) -> np.ndarray:
        """Field at time t, linearly interpolated between snapshots."""
        if t <= self.times[0]:
            return self.fields[0].copy()
        if t >= self.times[-1]:
            return self.fields[-1].copy()
        j = int(np.searchsorted(self.times, t) - 1)
        frac = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return (1.0 - frac) * self.fields[j] + frac * self.fields[j + 1]

    def recompute_diagnostics(self):
        """Diagnostics rebuilt from the stored fields (for invariant checks)."""
        weights = trapezoid_weights(self.domain)
        phi = self.eigen.phi.values
        sup = np.array([np.max(np.abs(f)) for f in self.fields])
        inf = np.array([f.min() for f in self.fields])
        proj = np.array([np.sum(weights * f * phi) for f in self.fields])
        patterns = [sign_pattern(f) for f in self.fields]
        return sup, inf, proj, patterns


def _rhs_for(cfg: SchemeConfig, h: float):
    if cfg.kind == ELASTO_PLASTIC:
        bm, bp = cfg.params.b_minus, cfg.params.b_plus
        return lambda v: ep_rhs_array(v, h, bm, bp)
    return lambda v: layer_rhs_array(v, h, cfg.layer_coeff)


def _check_compatible(u0: GridFunction):
    if np.max(np.abs(u0.values[u0.domain.boundary_mask])) > BOUNDARY_TOL:
        raise CompatibilityError("initial datum is nonzero on the boundary")


def integrate(u0: GridFunction, cfg: SchemeConfig) -> Solution:
    """Forward-Euler evolution with snapshots every cfg.stride steps.

    The boundary is re-clamped to zero after every step; the first and the
    final step are always snapshotted.  Any non-finite value aborts with
    BlowUp (cannot happen under the CFL bound).
    """
    dom = u0.domain
    cfg.validate(dom)
    _check_compatible(u0)
    rhs = _rhs_for(cfg, dom.h)
    bmask = dom.boundary_mask
    eig = eigenpair(dom)
    weights = trapezoid_weights(dom)
    phi = eig.phi.values

    n_steps = max(1, int(math.ceil(cfg.t_final / cfg.dt - 1e-9)))
    v = u0.values.copy()
    v[bmask] = 0.0

    times, fields, sups, infs, projs, patterns = [], [], [], [], [], []

    def emit(step: int):
        times.append(step * cfg.dt)
        fields.append(v.copy())
        sups.append(float(np.max(np.abs(v))))
        infs.append(float(v.min()))
        projs.append(float(np.sum(weights * v * phi)))
        patterns.append(sign_pattern(v))

    emit(0)
    for step in range(1, n_steps + 1):
        v = v + cfg.dt * rhs(v)
        v[bmask] = 0.0
        if step % cfg.stride == 0 or step == n_steps:
            if not np.all(np.isfinite(v)):
                raise BlowUp(f"non-finite value at step {step}")
            emit(step)

    return Solution(cfg.params, dom, np.array(times), np.array(fields),
                    np.array(sups), np.array(infs), np.array(projs),
                    patterns, eig)


STATIONARY_RATE_TOL = 1e-8


def evolve_to_stationary(u0: GridFunction, cfg: SchemeConfig,
                         rate_tol: float = STATIONARY_RATE_TOL,
                         check_every: int = 64) -> tuple[GridFunction, float]:
    """Run until the sup-norm change per unit time drops below rate_tol.

    Stops at cfg.t_final at the latest; returns the final field and the
    stopping time.
    """
    dom = u0.domain
    cfg.validate(dom)
    _check_compatible(u0)
    rhs = _rhs_for(cfg, dom.h)
    bmask = dom.boundary_mask
    v = u0.values.copy()
    v[bmask] = 0.0
    n_steps = max(1, int(math.ceil(cfg.t_final / cfg.dt - 1e-9)))
    prev = v.copy()
    for step in range(1, n_steps + 1):
        v = v + cfg.dt * rhs(v)
        v[bmask] = 0.0
        if step % check_every == 0:
            if not np.all(np.isfinite(v)):
                raise BlowUp(f"non-finite value at step {step}")
            rate = np.max(np.abs(v - prev)) / (check_every * cfg.dt)
            if rate <= rate_tol:
                return GridFunction(dom, v, step * cfg.dt), step * cfg.dt
            prev = v.copy()
    return GridFunction(dom, v, n_steps * cfg.dt), n_steps * cfg.dt


@dataclass
class LimitReport:
    """Sup-norm gaps between solver runs and their singular-limit target."""

    mode: str
    parameter_values: list[float]
    times: list[float]
    gaps: np.ndarray              # shape (len(parameter_values), len(times))
    target_label: str
    notes: dict = field(default_factory=dict)

    def gaps_monotone(self, t_index: int, slack: float = 0.0) -> bool:
        column = self.gaps[:, t_index]
        return bool(np.all(np.diff(column) <= slack))


def limit_small_b_minus(u0: GridFunction, b_plus: float,
                        b_minus_list: list[float],
                        times: list[float]) -> LimitReport:
    """Gap to heat flow (diffusivity 1/b_plus) from the projected datum.

    b_minus_list must be decreasing; at each fixed comparison time the
    gaps decrease along the list.
    """
    if any(b2 >= b1 for b1, b2 in zip(b_minus_list, b_minus_list[1:])):
        raise ValueError("b_minus_list must be strictly decreasing")
    tilde = project_initial(u0, tol=1e-12).tilde_u0
    series = heat_series(tilde, kappa=b_plus)
    targets = [series.evaluate(t).values for t in times]
    gaps = np.empty((len(b_minus_list), len(times)))
    for i, bm in enumerate(b_minus_list):
        cfg = auto_config(u0.domain, Parameters(bm, b_plus), max(times))
        sol = integrate(u0, cfg)
        for j, t in enumerate(times):
            gaps[i, j] = np.max(np.abs(sol.value_at_time(t) - targets[j]))
    return LimitReport("small_b_minus", list(b_minus_list), list(times), gaps,
                       "heat flow from projected datum, kappa=b_plus")


def limit_large_b_plus(u0: GridFunction, b_minus: float,
                       b_plus_list: list[float],
                       times: list[float]) -> LimitReport:
    """Gap to the layer flow b_minus * dw/dt = min(Lap w, 0)."""
    if any(b2 <= b1 for b1, b2 in zip(b_plus_list, b_plus_list[1:])):
        raise ValueError("b_plus_list must be strictly increasing")
    layer_cfg = auto_config(u0.domain, Parameters(b_minus, b_minus), max(times),
                            kind=LAYER, layer_coeff=b_minus)
    layer_sol = integrate(u0, layer_cfg)
    targets = [layer_sol.value_at_time(t) for t in times]
    gaps = np.empty((len(b_plus_list), len(times)))
    for i, bp in enumerate(b_plus_list):
        cfg = auto_config(u0.domain, Parameters(b_minus, bp), max(times))
        sol = integrate(u0, cfg)
        for j, t in enumerate(times):
            gaps[i, j] = np.max(np.abs(sol.value_at_time(t) - targets[j]))
    return LimitReport("large_b_plus", list(b_plus_list), list(times), gaps,
                       "layer flow with coefficient b_minus")


def limit_layer_projection(u0: GridFunction, coeff: float = 1.0,
                           t_max: float = 4.0,
                           rate_tol: float = STATIONARY_RATE_TOL) -> LimitReport:
    """Long-time gap of the layer flow to the obstacle projection of u0."""
    params = Parameters(1.0, 1.0)
    cfg = auto_config(u0.domain, params, t_max, kind=LAYER, layer_coeff=coeff)
    final, t_stop = evolve_to_stationary(u0, cfg, rate_tol)
    tilde = project_initial(u0, tol=1e-12).tilde_u0
    gap = float(np.max(np.abs(final.values - tilde.values)))
    return LimitReport("layer_projection", [coeff], [t_stop],
                       np.array([[gap]]), "obstacle projection of u0",
                       notes={"t_stop": t_stop})


def limit_rescaled_large_b_plus(u0: GridFunction, b_minus: float,
                                b_plus_list: list[float],
                                times: list[float]) -> LimitReport:
    """Gap of u(x, b_plus * t) to unit heat flow from the projected datum."""
    if any(b2 <= b1 for b1, b2 in zip(b_plus_list, b_plus_list[1:])):
        raise ValueError("b_plus_list must be strictly increasing")
    tilde = project_initial(u0, tol=1e-12).tilde_u0
    series = heat_series(tilde, kappa=1.0)
    targets = [series.evaluate(t).values for t in times]
    gaps = np.empty((len(b_plus_list), len(times)))
    for i, bp in enumerate(b_plus_list):
        cfg = auto_config(u0.domain, Parameters(b_minus, bp), bp * max(times))
        sol = integrate(u0, cfg)
        for j, t in enumerate(times):
            gaps[i, j] = np.max(np.abs(sol.value_at_time(bp * t) - targets[j]))
    return LimitReport("rescaled_large_b_plus", list(b_plus_list), list(times),
                       gaps, "unit heat flow from projected datum")


def limit_suite(u0: GridFunction, params: Parameters,
                small_b_minus: list[float] | None = None,
                large_b_plus: list[float] | None = None,
                times: list[float] = (0.1, 0.2)) -> list[LimitReport]:
    """Run the requested singular-limit experiments and collect reports."""
    reports = []
    if small_b_minus is not None:
        reports.append(limit_small_b_minus(u0, params.b_plus,
                                           list(small_b_minus), list(times)))
    if large_b_plus is not None:
        reports.append(limit_large_b_plus(u0, params.b_minus,
                                          list(large_b_plus), list(times)))
        reports.append(limit_rescaled_large_b_plus(u0, params.b_minus,
                                                   list(large_b_plus), list(times)))
    reports.append(limit_layer_projection(u0))
    return reports
