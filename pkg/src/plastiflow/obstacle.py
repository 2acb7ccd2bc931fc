"""Projection of initial data onto the largest subharmonic minorant.

The effective initial datum is the fixed point of the monotone sweep
w <- min(u0, neighbor average of w) started at w = u0 with boundary values
clamped to min(u0, 0).  A lower-convex-hull construction provides an
independent 1D oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NoConvergence, NonFiniteInput, UnsupportedDomain
from .grids import GridFunction, Interval, neighbor_average

DEFAULT_TOL = 1e-10
SWEEP_CAP = 10_000_000


@dataclass
class ObstacleResult:
    tilde_u0: GridFunction
    contact: np.ndarray          # nodes where the projection touches u0
    sweeps: int
    residual: float              # sup-norm change of the final sweep


@njit(cache=True)
def _gs_sweep_1d(w, obstacle):
    change = 0.0
    for i in range(1, w.size - 1):
        avg = 0.5 * (w[i - 1] + w[i + 1])
        new = avg if avg < obstacle[i] else obstacle[i]
        d = abs(new - w[i])
        if d > change:
            change = d
        w[i] = new
    return change


@njit(cache=True)
def _gs_sweep_2d(w, obstacle):
    change = 0.0
    nx, ny = w.shape
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            avg = 0.25 * (w[i - 1, j] + w[i + 1, j] + w[i, j - 1] + w[i, j + 1])
            new = avg if avg < obstacle[i, j] else obstacle[i, j]
            d = abs(new - w[i, j])
            if d > change:
                change = d
            w[i, j] = new
    return change


def _jacobi_sweep(w: np.ndarray, obstacle: np.ndarray, interior: np.ndarray) -> float:
    new = np.minimum(obstacle, neighbor_average(w))
    change = float(np.max(np.abs(new[interior] - w[interior]))) if interior.any() else 0.0
    w[interior] = new[interior]
    return change


def project_initial(u0: GridFunction, tol: float = DEFAULT_TOL,
                    mode: str = "gauss_seidel",
                    max_sweeps: int = SWEEP_CAP) -> ObstacleResult:
    """Largest discrete-subharmonic minorant of u0 with boundary <= 0.

    mode "gauss_seidel" sweeps in place in ascending index order;
    "jacobi" updates all nodes from the previous sweep (parallelizable,
    retained for determinism checks).  Both reach the same fixed point.
    Converged when the sup-norm change of a sweep is <= tol.
    """
    if not np.all(np.isfinite(u0.values)):
        raise NonFiniteInput("obstacle data contains non-finite values")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dom = u0.domain
    w = u0.values.copy()
    bmask = dom.boundary_mask
    w[bmask] = np.minimum(u0.values[bmask], 0.0)
    interior = dom.interior_mask

    if mode == "gauss_seidel":
        sweep = _gs_sweep_1d if dom.ndim == 1 else _gs_sweep_2d
        args = (u0.values,)
    elif mode == "jacobi":
        sweep = _jacobi_sweep
        args = (u0.values, interior)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")

    residual = np.inf
    for sweeps in range(1, max_sweeps + 1):
        residual = sweep(w, *args)
        if residual <= tol:
            break
    else:
        raise NoConvergence(f"obstacle projection: {max_sweeps} sweeps exceeded")

    contact = np.abs(w - u0.values) <= 10.0 * max(tol, 1e-14)
    contact[bmask] = np.abs(w[bmask] - u0.values[bmask]) <= 10.0 * max(tol, 1e-14)
    return ObstacleResult(u0.with_values(w, u0.time), contact, sweeps, residual)


def convex_envelope_1d(u0: GridFunction) -> GridFunction:
    """Lower convex hull of the nodal graph, endpoints clamped to <= 0.

    In 1D a discrete-subharmonic sequence is exactly a convex sequence, so
    this is an independent oracle for :func:`project_initial`.  Monotone
    chain over the points (x_i, y_i) with y = u0 at interior nodes and
    min(u0, 0) at the endpoints.
    """
    dom = u0.domain
    if not isinstance(dom.kind, Interval):
        raise UnsupportedDomain("convex envelope oracle is 1D only")
    x = dom.axes[0]
    y = u0.values.copy()
    y[0] = min(y[0], 0.0)
    y[-1] = min(y[-1], 0.0)

    hull_x = [x[0]]
    hull_y = [y[0]]
    for xi, yi in zip(x[1:], y[1:]):
        while len(hull_x) >= 2:
            cross = (hull_x[-1] - hull_x[-2]) * (yi - hull_y[-2]) \
                - (hull_y[-1] - hull_y[-2]) * (xi - hull_x[-2])
            if cross <= 0.0:
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(xi)
        hull_y.append(yi)

    env = np.interp(x, np.array(hull_x), np.array(hull_y))
    env[0], env[-1] = y[0], y[-1]
    return u0.with_values(env, u0.time)
