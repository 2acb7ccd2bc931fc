"""Monte Carlo simulation of the clock-minimization game.

A token starts at (x0, t0); each round the player picks a clock value b in
[C b_minus, C b_plus], the token jumps uniformly inside the eps-ball and
the clock drops by b eps^2.  Leaving the open domain with positive clock
pays 0, running out the clock pays the initial datum at the final
position.  Trajectory i draws its randomness from an own generator seeded
seed + i, so serial, chunked and threaded runs aggregate bitwise
identically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dpp import DppTable, GameConfig, greedy_clock_table
from .errors import ConfigError, StoppingFailure, UnsupportedDomain

DEFAULT_CHUNK = 16384
Z_99 = 2.5758293035489004  # two-sided 99% normal quantile


def sample_ball(x, eps: float, rng: np.random.Generator):
    """Uniform draw from the open ball of radius eps around x.

    1D consumes one uniform per draw, 2D two (radius eps*sqrt(u), angle);
    the raw-stream order is what the vectorized drivers reproduce.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(x + eps * (2.0 * rng.random() - 1.0))
    if x.size == 1:
        return x + eps * (2.0 * rng.random() - 1.0)
    r = eps * math.sqrt(rng.random())
    ang = 2.0 * math.pi * rng.random()
    return np.array([x[0] + r * math.cos(ang), x[1] + r * math.sin(ang)])


class ConstantB:
    """Fixed clock value, validated against the admissible interval."""

    def __init__(self, b: float):
        self.b = float(b)

    def clamp(self, cfg: GameConfig) -> float:
        lo = cfg.big_c * cfg.params.b_minus
        hi = cfg.big_c * cfg.params.b_plus
        if not lo - 1e-12 <= self.b <= hi + 1e-12:
            raise ConfigError(f"clock {self.b} outside [{lo}, {hi}]")
        return min(max(self.b, lo), hi)

    def choose(self, cfg: GameConfig, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        return np.full(ts.shape, self.clamp(cfg))


class EndpointBySign:
    """Pick C b_plus where the table's local time slope is >= 0, else C b_minus."""

    def __init__(self, table: DppTable):
        self.table = table

    def choose(self, cfg: GameConfig, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        dt = self.table.times[1] - self.table.times[0]
        now = table_values_bulk(self.table, xs, ts)
        before = table_values_bulk(self.table, xs, np.maximum(ts - dt, self.table.times[0]))
        slope = now - before
        hi = cfg.big_c * cfg.params.b_plus
        lo = cfg.big_c * cfg.params.b_minus
        return np.where(slope >= 0.0, hi, lo)


class TableGreedy:
    """argmin of the ball average over the clock grid, looked up from a table."""

    def __init__(self, table: DppTable):
        self.table = table
        self.choice = greedy_clock_table(table)

    def choose(self, cfg: GameConfig, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
        grid = self.table.grid
        if grid.domain.ndim != 1:
            raise UnsupportedDomain("table-greedy lookup is 1D")
        t0 = self.table.times[0]
        dt = self.table.times[1] - t0
        h = grid.domain.h
        i = np.clip(np.rint((xs - grid.axes[0][0]) / h).astype(int),
                    0, grid.axes[0].size - 1)
        k = np.clip(np.rint((ts - t0) / dt).astype(int), 0, self.table.times.size - 1)
        return cfg.b_grid[self.choice[k, i]]


SPACE_EXIT = "space"
TIME_EXIT = "time"


@dataclass
class Trajectory:
    positions: np.ndarray         # (tau+1,) or (tau+1, 2) including start
    times: np.ndarray             # (tau+1,)
    clocks: np.ndarray            # (tau,) chosen b values
    exit_kind: str
    payoff: float
    seed: int | None = None

    @property
    def tau(self) -> int:
        return self.times.size - 1


def _inside_open(cfg: GameConfig, x) -> bool:
    dom = cfg.domain
    if dom.ndim == 1:
        xi = float(np.atleast_1d(x)[0])
        return 0.0 < xi < dom.kind.length
    return 0.0 < x[0] < dom.kind.lx and 0.0 < x[1] < dom.kind.ly


def play(cfg: GameConfig, strategy, start, rng: np.random.Generator,
         seed: int | None = None) -> Trajectory:
    """Single trajectory from start = (x0, t0) in Omega x (0, inf)."""
    x0, t0 = start
    if not _inside_open(cfg, x0) or not t0 > 0:
        raise ConfigError("start must lie in the open domain with t > 0")
    cap = 10 * math.ceil(t0 / cfg.lookback_min) + 1_000_000
    xs = [np.atleast_1d(np.asarray(x0, dtype=float)).copy()]
    ts = [float(t0)]
    bs = []
    x, t = xs[0], t0
    scalar = cfg.domain.ndim == 1
    for _ in range(cap):
        b = float(strategy.choose(cfg, np.atleast_2d(x) if not scalar else x,
                                  np.atleast_1d(t))[0])
        x_next = sample_ball(x if not scalar else x[0], cfg.epsilon, rng)
        x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
        t_next = t - b * cfg.epsilon ** 2
        xs.append(x_next)
        ts.append(t_next)
        bs.append(b)
        if t_next <= cfg.time_floor:
            payoff = cfg.payoff_at(x_next)
            kind = TIME_EXIT
            break
        if not _inside_open(cfg, x_next):
            payoff = 0.0
            kind = SPACE_EXIT
            break
        x, t = x_next, t_next
    else:
        raise StoppingFailure("trajectory exceeded its hard step cap")
    pos = np.array([p[0] for p in xs]) if scalar else np.array(xs)
    return Trajectory(pos, np.array(ts), np.array(bs), kind, float(payoff), seed)


@dataclass
class ValueEstimate:
    mean: float
    stderr: float
    n: int
    seed: int
    exit_counts: dict = field(default_factory=dict)
    step_histogram: dict = field(default_factory=dict)

    @property
    def half_width(self) -> float:
        return Z_99 * self.stderr


def _uniform_buffer(seed: int, offset: int, count: int, m: int, per_step: int) -> np.ndarray:
    """Row i holds trajectory (offset+i)'s uniforms, from its own generator."""
    shape = (m,) if per_step == 1 else (m, per_step)
    out = np.empty((count,) + shape)
    for i in range(count):
        out[i] = np.random.default_rng(seed + offset + i).random(shape)
    return out


def _payoffs_bulk(cfg: GameConfig, xs: np.ndarray) -> np.ndarray:
    dom = cfg.domain
    if dom.ndim == 1:
        vals = np.interp(xs, dom.axes[0], cfg.u0.values)
        vals[(xs <= 0.0) | (xs >= dom.kind.length)] = 0.0
        return vals
    out = np.array([cfg.payoff_at(x) for x in xs])
    return out


def _run_chunk(cfg: GameConfig, strategy, start, seed: int, offset: int,
               count: int, record_paths: bool = False):
    """Lockstep simulation of `count` trajectories; returns payoff data.

    Mirrors :func:`play` draw for draw: per round one uniform (1D) or two
    (2D) per trajectory, consumed column-wise from the per-trajectory
    buffers.
    """
    x0, t0 = start
    dom = cfg.domain
    scalar = dom.ndim == 1
    m = math.ceil(t0 / cfg.lookback_min - 1e-9)
    per_step = 1 if scalar else 2
    u = _uniform_buffer(seed, offset, count, m, per_step)
    eps = cfg.epsilon
    eps2 = eps * eps

    if scalar:
        xs = np.full(count, float(np.atleast_1d(x0)[0]))
        length = dom.kind.length
    else:
        xs = np.tile(np.asarray(x0, dtype=float), (count, 1))
    ts = np.full(count, float(t0))
    alive = np.ones(count, dtype=bool)
    payoffs = np.zeros(count)
    steps = np.zeros(count, dtype=np.int64)
    kinds = np.empty(count, dtype="U5")
    paths_x = [xs.copy()] if record_paths else None
    paths_t = [ts.copy()] if record_paths else None
    alive_history = [alive.copy()] if record_paths else None

    for k in range(m):
        if not alive.any():
            break
        idx = np.nonzero(alive)[0]
        b = strategy.choose(cfg, xs[idx], ts[idx])
        if scalar:
            step = eps * (2.0 * u[idx, k] - 1.0)
            x_new = xs[idx] + step
            outside = (x_new <= 0.0) | (x_new >= length)
        else:
            r = eps * np.sqrt(u[idx, k, 0])
            ang = 2.0 * math.pi * u[idx, k, 1]
            x_new = xs[idx] + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
            outside = (x_new[:, 0] <= 0.0) | (x_new[:, 0] >= dom.kind.lx) \
                | (x_new[:, 1] <= 0.0) | (x_new[:, 1] >= dom.kind.ly)
        t_new = ts[idx] - b * eps2
        xs[idx] = x_new
        ts[idx] = t_new
        steps[idx] += 1

        timed_out = t_new <= cfg.time_floor
        spaced_out = ~timed_out & outside
        done = timed_out | spaced_out
        if done.any():
            done_idx = idx[done]
            t_idx = idx[timed_out]
            if t_idx.size:
                payoffs[t_idx] = _payoffs_bulk(cfg, xs[t_idx])
                kinds[t_idx] = TIME_EXIT
            s_idx = idx[spaced_out]
            if s_idx.size:
                payoffs[s_idx] = 0.0
                kinds[s_idx] = SPACE_EXIT
            alive[done_idx] = False
        if record_paths:
            paths_x.append(xs.copy())
            paths_t.append(ts.copy())
            alive_history.append(alive.copy())

    if alive.any():
        raise StoppingFailure("lockstep trajectories outlived the time budget")
    result = {"payoffs": payoffs, "steps": steps, "kinds": kinds}
    if record_paths:
        result["paths_x"] = np.array(paths_x)
        result["paths_t"] = np.array(paths_t)
        result["alive"] = np.array(alive_history)
    return result


def estimate_value(cfg: GameConfig, strategy, start, n: int, seed: int,
                   chunk: int = DEFAULT_CHUNK, threads: int = 1) -> ValueEstimate:
    """Mean payoff over n trajectories with per-trajectory seeds seed+i.

    The aggregation is an ordered reduction over fixed-size chunks, so the
    result is bitwise reproducible and independent of the thread count.
    """
    if n < 100:
        raise ConfigError("need at least 100 trajectories")
    offsets = list(range(0, n, chunk))
    counts = [min(chunk, n - off) for off in offsets]

    def work(args):
        off, cnt = args
        return _run_chunk(cfg, strategy, start, seed, off, cnt)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, zip(offsets, counts)))
    else:
        results = [work(a) for a in zip(offsets, counts)]

    total = 0.0
    total_sq = 0.0
    exit_counts: dict[str, int] = {}
    step_hist: dict[int, int] = {}
    for res in results:
        total += float(np.sum(res["payoffs"]))
        total_sq += float(np.sum(res["payoffs"] ** 2))
        for kind in (TIME_EXIT, SPACE_EXIT):
            exit_counts[kind] = exit_counts.get(kind, 0) + int(np.sum(res["kinds"] == kind))
        for s, c in zip(*np.unique(res["steps"], return_counts=True)):
            step_hist[int(s)] = step_hist.get(int(s), 0) + int(c)
    mean = total / n
    var = max(0.0, (total_sq - n * mean * mean) / (n - 1))
    stderr = math.sqrt(var / n)
    return ValueEstimate(mean, stderr, n, seed, exit_counts, step_hist)


def wilson_interval(successes: int, n: int, z: float = Z_99) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class ExitStats:
    p_far: float
    p_far_interval: tuple[float, float]
    p_slow: float
    p_slow_interval: tuple[float, float]
    n: int
    mean_steps: float


def exit_stats(cfg: GameConfig, start, boundary_point, a: float, n: int,
               seed: int, chunk_steps: int = 512) -> ExitStats:
    """Pure random walk until space exit; no clock, strategy-free.

    Reports the frequency of exiting farther than `a` from the reference
    boundary point and of needing at least a/(2 eps^2) rounds, with Wilson
    99% intervals.
    """
    dom = cfg.domain
    eps = cfg.epsilon
    slow_cut = a / (2.0 * eps * eps)
    far = 0
    slow = 0
    step_total = 0
    scalar = dom.ndim == 1
    if scalar:
        length = dom.kind.length
        y = float(np.atleast_1d(boundary_point)[0])
    else:
        y = np.asarray(boundary_point, dtype=float)
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        tau = 0
        if scalar:
            x = float(np.atleast_1d(start)[0])
            while True:
                u = rng.random(chunk_steps)
                pos = x + np.cumsum(eps * (2.0 * u - 1.0))
                outside = (pos <= 0.0) | (pos >= length)
                hit = np.nonzero(outside)[0]
                if hit.size:
                    j = hit[0]
                    tau += j + 1
                    x_exit = pos[j]
                    break
                tau += chunk_steps
                x = pos[-1]
            dist = abs(x_exit - y)
        else:
            x = np.asarray(start, dtype=float).copy()
            lx, ly = dom.kind.lx, dom.kind.ly
            while True:
                u = rng.random((chunk_steps, 2))
                r = eps * np.sqrt(u[:, 0])
                ang = 2.0 * math.pi * u[:, 1]
                pos = x + np.cumsum(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1), axis=0)
                outside = (pos[:, 0] <= 0.0) | (pos[:, 0] >= lx) \
                    | (pos[:, 1] <= 0.0) | (pos[:, 1] >= ly)
                hit = np.nonzero(outside)[0]
                if hit.size:
                    j = hit[0]
                    tau += j + 1
                    x_exit = pos[j]
                    break
                tau += chunk_steps
                x = pos[-1]
            dist = float(np.hypot(*(x_exit - y)))
        far += dist >= a
        slow += tau >= slow_cut
        step_total += tau
    return ExitStats(far / n, wilson_interval(far, n),
                     slow / n, wilson_interval(slow, n), n, step_total / n)


def table_values_bulk(table: DppTable, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Vectorized space-time interpolation of a 1D value table."""
    grid = table.grid
    if grid.domain.ndim != 1:
        raise UnsupportedDomain("bulk table interpolation is 1D")
    ax = grid.axes[0]
    t0 = table.times[0]
    dt = table.times[1] - t0
    pos = np.clip((ts - t0) / dt, 0.0, table.times.size - 1 - 1e-12)
    k = np.floor(pos).astype(int)
    ft = pos - k
    xc = np.clip(xs, ax[0], ax[-1])
    px = (xc - ax[0]) / grid.domain.h
    i = np.clip(np.floor(px).astype(int), 0, ax.size - 2)
    fx = px - i
    v00 = table.values[k, i]
    v01 = table.values[k, i + 1]
    v10 = table.values[k + 1, i]
    v11 = table.values[k + 1, i + 1]
    return (1 - ft) * ((1 - fx) * v00 + fx * v01) + ft * ((1 - fx) * v10 + fx * v11)


@dataclass
class MartingaleReport:
    step_means: np.ndarray
    step_stderrs: np.ndarray
    step_counts: np.ndarray
    terminal_mean: float
    terminal_stderr: float
    start_value: float
    n: int

    @property
    def terminal_gap(self) -> float:
        return self.terminal_mean - self.start_value


def martingale_diagnostic(table: DppTable, cfg: GameConfig, strategy, start,
                          n: int, seed: int) -> MartingaleReport:
    """Per-round drift of the table value along simulated trajectories.

    For any strategy the conditional drift of the stored value is
    nonnegative up to interpolation noise (the stored value is the min over
    clocks of the one-step average); for the greedy strategy the terminal
    mean payoff matches the start value.
    """
    res = _run_chunk(cfg, strategy, start, seed, 0, n, record_paths=True)
    px, pt, alive = res["paths_x"], res["paths_t"], res["alive"]
    n_rounds = px.shape[0] - 1
    means, errs, counts = [], [], []
    for k in range(n_rounds):
        active = alive[k]
        cnt = int(active.sum())
        if cnt == 0:
            break
        v_now = table_values_bulk(table, px[k][active], pt[k][active])
        v_next = table_values_bulk(table, px[k + 1][active], pt[k + 1][active])
        inc = v_next - v_now
        means.append(float(inc.mean()))
        errs.append(float(inc.std(ddof=1) / math.sqrt(cnt)) if cnt > 1 else 0.0)
        counts.append(cnt)
    payoffs = res["payoffs"]
    x0, t0 = start
    start_value = table.value_at(x0, t0)
    return MartingaleReport(np.array(means), np.array(errs),
                            np.array(counts, dtype=int),
                            float(payoffs.mean()),
                            float(payoffs.std(ddof=1) / math.sqrt(n)),
                            float(start_value), n)
