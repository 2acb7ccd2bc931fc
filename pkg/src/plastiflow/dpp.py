"""Lattice solver for the minimization-game value function.

The value at (x, t) is the infimum over clock choices b in [C b_minus,
C b_plus] of the ball average of the value at time t - b eps^2.  Because
every lookback lands strictly earlier than the slab being filled, a single
causal sweep over time slabs reproduces the monotone-iteration fixed point.
An alternate two-radius formulation (radii eps/sqrt(b), fixed lookback
C eps^2) is provided as a cross-check; both tables approximate the same
continuum solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CompatibilityError, ConfigError, LookbackUnderflow
from .grids import Domain, GridFunction, Parameters

MIN_NODES_PER_RADIUS = 10


def mean_value_constant(dim: int) -> float:
    """Taylor constant of the ball mean: half the average of y1^2 over B_1.

    The average of a C^2 function over B_eps(x) is f(x) plus this constant
    times eps^2 Lap f(x) + o(eps^2); the value is 1/(2(dim+2)).  It is also
    the clock scale that makes the game consistent with the equation.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    return 1.0 / (2.0 * (dim + 2))


def ball_second_moment_quadrature(dim: int, panels: int = 200_000) -> float:
    """Average of y1^2 over the unit ball, by 1D quadrature.

    Fubini through the first axis: sections are (dim-1)-balls whose volume
    is proportional to (1 - y^2)^((dim-1)/2); the constant cancels in the
    ratio, so no closed-form moment enters.
    """
    y = np.linspace(-1.0, 1.0, panels + 1)
    section = (1.0 - y * y) ** ((dim - 1) / 2.0)
    num = np.trapezoid(y * y * section, y)
    den = np.trapezoid(section, y)
    return float(num / den)


def pl_average_weights(h: float, eps: float) -> np.ndarray:
    """Nodal weights averaging the piecewise-linear interpolant over [-eps, eps].

    Exact for the PL interpolant (so exact for affine data), second-order
    for smooth data, and valid for any eps/h ratio including non-integer.
    """
    if eps <= 0 or h <= 0:
        raise ValueError("h and eps must be positive")
    m = int(math.ceil(eps / h - 1e-12))
    w = np.zeros(2 * m + 1)
    for k in range(-m, m):
        s0 = max(k * h, -eps)
        s1 = min((k + 1) * h, eps)
        if s1 <= s0:
            continue
        ln = s1 - s0
        tt = (0.5 * (s0 + s1) - k * h) / h
        w[k + m] += ln * (1.0 - tt)
        w[k + 1 + m] += ln * tt
    return w / (2.0 * eps)


def disc_inclusion_kernel(h: float, eps: float) -> np.ndarray:
    """Node-inclusion average over the disc of radius eps (2D)."""
    m = int(math.floor(eps / h + 1e-12))
    di = np.arange(-m, m + 1)
    inside = (di[:, None] ** 2 + di[None, :] ** 2) * h * h <= eps * eps * (1 + 1e-12)
    return inside.astype(float) / inside.sum()


@dataclass
class ExtendedGrid:
    """Domain grid inflated by a collar of exterior nodes.

    Exterior nodes (everything at distance <= collar outside the open
    domain, boundary included) carry the game's zero exit payoff.
    """

    domain: Domain
    collar: float
    m: int = field(init=False)
    axes: tuple = field(init=False)
    open_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        h = self.domain.h
        self.m = int(math.ceil(self.collar / h - 1e-12))
        ext_axes = []
        for ax in self.domain.axes:
            left = ax[0] - h * np.arange(self.m, 0, -1)
            right = ax[-1] + h * np.arange(1, self.m + 1)
            ext_axes.append(np.concatenate([left, ax, right]))
        self.axes = tuple(ext_axes)
        if self.domain.ndim == 1:
            x = self.axes[0]
            hi = self.domain.kind.length
            self.open_mask = (x > 1e-12) & (x < hi - 1e-12)
        else:
            x = self.axes[0][:, None]
            y = self.axes[1][None, :]
            lx, ly = self.domain.kind.lx, self.domain.kind.ly
            self.open_mask = (x > 1e-12) & (x < lx - 1e-12) \
                & (y > 1e-12) & (y < ly - 1e-12)

    @property
    def shape(self) -> tuple:
        return tuple(ax.size for ax in self.axes)

    def embed(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Place a domain-shaped field into the extended grid."""
        out = np.full(self.shape, fill)
        if self.domain.ndim == 1:
            out[self.m:self.m + values.size] = values
        else:
            nx, ny = values.shape
            out[self.m:self.m + nx, self.m:self.m + ny] = values
        return out

    def restrict(self, values: np.ndarray) -> np.ndarray:
        if self.domain.ndim == 1:
            n = self.domain.shape[0]
            return values[self.m:self.m + n]
        nx, ny = self.domain.shape
        return values[self.m:self.m + nx, self.m:self.m + ny]

    def node_index(self, x) -> tuple:
        """Index of the extended node nearest to x (must be within h/10)."""
        idx = []
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        for ax, xi in zip(self.axes, pt):
            i = int(round((xi - ax[0]) / self.domain.h))
            i = min(max(i, 0), ax.size - 1)
            if abs(ax[i] - xi) > 0.1 * self.domain.h:
                raise ValueError(f"{x} is not a grid node")
            idx.append(i)
        return tuple(idx)


@dataclass
class GameConfig:
    """Step radius, clock constant, payoff data and lattice resolution."""

    params: Parameters
    u0: GridFunction
    epsilon: float
    big_c: float | None = None
    k_samples: int = 9
    delta_t: float | None = None

    def __post_init__(self):
        dom = self.u0.domain
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if dom.h > self.epsilon / MIN_NODES_PER_RADIUS * (1 + 1e-12):
            raise ConfigError(
                f"grid too coarse: h={dom.h} must be <= epsilon/{MIN_NODES_PER_RADIUS}")
        if self.k_samples < 2:
            raise ConfigError("clock grid needs at least 2 samples")
        if self.big_c is None:
            self.big_c = mean_value_constant(dom.ndim)
        if self.delta_t is None:
            self.delta_t = self.lookback_min / 4.0
        if self.delta_t > self.lookback_min * (1 + 1e-12):
            raise ConfigError(
                "delta_t must not exceed C*b_minus*eps^2 (shortest lookback)")
        if np.max(np.abs(self.u0.values[dom.boundary_mask])) > 1e-12:
            raise CompatibilityError("payoff datum is nonzero on the boundary")

    @property
    def domain(self) -> Domain:
        return self.u0.domain

    @property
    def lookback_min(self) -> float:
        return self.big_c * self.params.b_minus * self.epsilon ** 2

    @property
    def lookback_max(self) -> float:
        return self.big_c * self.params.b_plus * self.epsilon ** 2

    @property
    def time_floor(self) -> float:
        """Clock values at or below this count as expired (fp slack)."""
        return 1e-9 * self.lookback_min

    @property
    def b_grid(self) -> np.ndarray:
        return np.linspace(self.big_c * self.params.b_minus,
                           self.big_c * self.params.b_plus, self.k_samples)

    @property
    def alternate_radii(self) -> tuple[float, float]:
        return (self.epsilon / math.sqrt(self.params.b_minus),
                self.epsilon / math.sqrt(self.params.b_plus))

    def payoff_at(self, x) -> float:
        """Terminal datum extended by zero outside the open domain."""
        dom = self.domain
        if dom.ndim == 1:
            length = dom.kind.length
            xi = float(np.atleast_1d(x)[0])
            if xi <= 0.0 or xi >= length:
                return 0.0
            return float(np.interp(xi, dom.axes[0], self.u0.values))
        xi, yi = float(x[0]), float(x[1])
        lx, ly = dom.kind.lx, dom.kind.ly
        if xi <= 0.0 or xi >= lx or yi <= 0.0 or yi >= ly:
            return 0.0
        i = min(int(xi / dom.h), dom.shape[0] - 2)
        j = min(int(yi / dom.h), dom.shape[1] - 2)
        fx = xi / dom.h - i
        fy = yi / dom.h - j
        v = self.u0.values
        return float((1 - fx) * (1 - fy) * v[i, j] + fx * (1 - fy) * v[i + 1, j]
                     + (1 - fx) * fy * v[i, j + 1] + fx * fy * v[i + 1, j + 1])


def _apply_kernel(slab: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    if slab.ndim == 1:
        return np.convolve(slab, kernel, mode="same")
    m = kernel.shape[0] // 2
    padded = np.pad(slab, m)
    out = np.zeros_like(slab)
    for di in range(kernel.shape[0]):
        for dj in range(kernel.shape[1]):
            w = kernel[di, dj]
            if w == 0.0:
                continue
            out += w * padded[di:di + slab.shape[0], dj:dj + slab.shape[1]]
    return out


@dataclass
class DppTable:
    """Game values on (the inflated grid) x (a uniform time lattice)."""

    config: GameConfig
    grid: ExtendedGrid
    times: np.ndarray
    values: np.ndarray            # shape (n_slabs,) + grid.shape

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def slab_at(self, t: float) -> np.ndarray:
        """Field at time t, linear interpolation between lattice slabs."""
        t0 = self.times[0]
        dt = self.times[1] - self.times[0]
        if t < t0 - 1e-9 * max(1.0, abs(t0)):
            raise LookbackUnderflow(f"t={t} below stored range start {t0}")
        pos = (t - t0) / dt
        j = int(math.floor(pos + 1e-12))
        j = min(max(j, 0), self.times.size - 2)
        frac = min(max(pos - j, 0.0), 1.0)
        return (1.0 - frac) * self.values[j] + frac * self.values[j + 1]

    def value_at(self, x, t: float) -> float:
        """Space-time interpolated value (PL in space, linear in time)."""
        slab = self.slab_at(t)
        if self.grid.domain.ndim == 1:
            return float(np.interp(np.atleast_1d(x)[0], self.grid.axes[0], slab))
        ax, ay = self.grid.axes
        h = self.grid.domain.h
        xi = min(max(float(x[0]), ax[0]), ax[-1])
        yi = min(max(float(x[1]), ay[0]), ay[-1])
        i = min(int((xi - ax[0]) / h), ax.size - 2)
        j = min(int((yi - ay[0]) / h), ay.size - 2)
        fx = (xi - ax[i]) / h
        fy = (yi - ay[j]) / h
        return float((1 - fx) * (1 - fy) * slab[i, j] + fx * (1 - fy) * slab[i + 1, j]
                     + (1 - fx) * fy * slab[i, j + 1] + fx * fy * slab[i + 1, j + 1])


def _time_lattice(cfg: GameConfig, t_final: float) -> tuple[np.ndarray, int]:
    dt = cfg.delta_t
    n_neg = int(math.ceil(cfg.lookback_max / dt - 1e-9))
    n_pos = int(math.ceil(t_final / dt - 1e-9))
    times = (np.arange(n_neg + n_pos + 1) - n_neg) * dt
    return times, n_neg


def _seed_table(cfg: GameConfig, grid: ExtendedGrid, times: np.ndarray,
                n_neg: int) -> np.ndarray:
    values = np.zeros((times.size,) + grid.shape)
    datum = grid.embed(cfg.u0.values)
    datum[~grid.open_mask] = 0.0
    for k in range(n_neg + 1):
        values[k] = datum
    return values


def _ball_kernel(cfg: GameConfig, radius: float) -> np.ndarray:
    if cfg.domain.ndim == 1:
        return pl_average_weights(cfg.domain.h, radius)
    return disc_inclusion_kernel(cfg.domain.h, radius)


def dpp_solve(cfg: GameConfig, t_final: float) -> DppTable:
    """Fill the value lattice forward in time.

    Each interior value is the min over the clock grid of the ball average
    at the looked-back time; lookbacks land strictly below the current slab
    (delta_t <= shortest lookback), so the sweep is causal.
    """
    if t_final <= 0:
        raise ConfigError("t_final must be positive")
    grid = ExtendedGrid(cfg.domain, cfg.epsilon)
    times, n_neg = _time_lattice(cfg, t_final)
    values = _seed_table(cfg, grid, times, n_neg)
    kernel = _ball_kernel(cfg, cfg.epsilon)
    table = DppTable(cfg, grid, times, values)
    eps2 = cfg.epsilon ** 2
    for k in range(n_neg + 1, times.size):
        best = None
        for b in cfg.b_grid:
            slab = table.slab_at(times[k] - b * eps2)
            avg = _apply_kernel(slab, kernel)
            best = avg if best is None else np.minimum(best, avg)
        new = np.zeros(grid.shape)
        new[grid.open_mask] = best[grid.open_mask]
        values[k] = new
    return table


def dpp_alternate_solve(cfg: GameConfig, t_final: float) -> DppTable:
    """Two-radius variant: fixed lookback C eps^2, radii eps/sqrt(b±)."""
    if t_final <= 0:
        raise ConfigError("t_final must be positive")
    r1, r2 = cfg.alternate_radii
    grid = ExtendedGrid(cfg.domain, max(cfg.epsilon, r1, r2))
    times, n_neg = _time_lattice(cfg, t_final)
    values = _seed_table(cfg, grid, times, n_neg)
    kernels = [_ball_kernel(cfg, r1), _ball_kernel(cfg, r2)]
    table = DppTable(cfg, grid, times, values)
    lookback = cfg.big_c * cfg.epsilon ** 2
    for k in range(n_neg + 1, times.size):
        slab = table.slab_at(times[k] - lookback)
        avgs = [_apply_kernel(slab, kern) for kern in kernels]
        best = np.minimum(avgs[0], avgs[1])
        new = np.zeros(grid.shape)
        new[grid.open_mask] = best[grid.open_mask]
        values[k] = new
    return table


def ball_average(table: DppTable, x, t: float, b: float) -> float:
    """Spatial ball average of the stored values at time t - b eps^2."""
    cfg = table.config
    s = t - b * cfg.epsilon ** 2
    if s < table.times[0] - 1e-12:
        raise LookbackUnderflow(f"lookback {s} below stored range")
    idx = table.grid.node_index(x)
    slab = table.slab_at(s)
    kernel = _ball_kernel(cfg, cfg.epsilon)
    if table.grid.domain.ndim == 1:
        m = kernel.size // 2
        i = idx[0]
        window = slab[i - m:i + m + 1]
        if window.size != kernel.size:
            raise ValueError("ball sticks out of the stored collar")
        return float(np.dot(window, kernel))
    m = kernel.shape[0] // 2
    i, j = idx
    window = slab[i - m:i + m + 1, j - m:j + m + 1]
    if window.shape != kernel.shape:
        raise ValueError("ball sticks out of the stored collar")
    return float(np.sum(window * kernel))


def dpp_residual(table: DppTable) -> float:
    """Sup over interior lattice points of |stored - recomputed RHS|."""
    cfg = table.config
    kernel = _ball_kernel(cfg, cfg.epsilon)
    eps2 = cfg.epsilon ** 2
    n_neg = int(np.sum(table.times <= 1e-15)) - 1
    worst = 0.0
    for k in range(n_neg + 1, table.times.size):
        best = None
        for b in cfg.b_grid:
            slab = table.slab_at(table.times[k] - b * eps2)
            avg = _apply_kernel(slab, kernel)
            best = avg if best is None else np.minimum(best, avg)
        diff = np.abs(best - table.values[k])[table.grid.open_mask]
        worst = max(worst, float(diff.max()))
    return worst


def greedy_clock_table(table: DppTable) -> np.ndarray:
    """Index into the clock grid minimizing the ball average, per lattice point.

    Used by the table-greedy strategy; entries on slabs t <= 0 are 0 and
    never consulted.
    """
    cfg = table.config
    kernel = _ball_kernel(cfg, cfg.epsilon)
    eps2 = cfg.epsilon ** 2
    n_neg = int(np.sum(table.times <= 1e-15)) - 1
    choice = np.zeros((table.times.size,) + table.grid.shape, dtype=np.int8)
    for k in range(n_neg + 1, table.times.size):
        stack = []
        for b in cfg.b_grid:
            slab = table.slab_at(table.times[k] - b * eps2)
            stack.append(_apply_kernel(slab, kernel))
        choice[k] = np.argmin(np.stack(stack), axis=0).astype(np.int8)
    return choice
