import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import plastiflow as pf
from plastiflow.errors import ConfigError
from plastiflow.game import (
    SPACE_EXIT,
    TIME_EXIT,
    _run_chunk,
    table_values_bulk,
    wilson_interval,
)


def game_config(eps=0.05, params=None, u0_fn=None, h_over=10):
    params = params or pf.Parameters(1.0, 4.0)
    dom = pf.build_interval(1.0, eps / h_over)
    if u0_fn is None:
        u0 = pf.eigenpair(dom).phi
    else:
        x = dom.axes[0]
        vals = u0_fn(x)
        vals[0] = vals[-1] = 0.0
        u0 = pf.GridFunction(dom, vals)
    return pf.GameConfig(params, u0, eps)


class TestSampleBall:
    def test_support_1d(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            y = pf.sample_ball(0.4, 0.05, rng)
            assert abs(y - 0.4) < 0.05

    def test_support_2d(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            y = pf.sample_ball(np.array([0.4, 0.6]), 0.05, rng)
            assert np.hypot(y[0] - 0.4, y[1] - 0.6) < 0.05

    def test_mean_1d(self):
        rng = np.random.default_rng(2)
        eps, n = 0.3, 100_000
        draws = np.array([pf.sample_ball(0.5, eps, rng) for _ in range(n)])
        sigma = eps / math.sqrt(3.0)
        assert abs(draws.mean() - 0.5) <= 4 * sigma / math.sqrt(n)

    def test_second_moment_2d(self):
        rng = np.random.default_rng(3)
        eps, n = 0.2, 100_000
        sq = np.empty(n)
        for i in range(n):
            y = pf.sample_ball(np.array([0.0, 0.0]), eps, rng)
            sq[i] = y[0] ** 2 + y[1] ** 2
        # |y|^2 is uniform on [0, eps^2]: mean eps^2/2, var eps^4/12
        expected = eps ** 2 / 2
        tol = 4 * (eps ** 2 / math.sqrt(12.0)) / math.sqrt(n)
        assert abs(sq.mean() - expected) <= tol


class TestPlay:
    def test_one_forced_step(self):
        cfg = game_config(eps=0.1)
        t0 = 0.5 * cfg.lookback_min
        traj = pf.play(cfg, pf.ConstantB(cfg.big_c), (0.5, t0), np.random.default_rng(0))
        assert traj.tau == 1
        assert traj.exit_kind == TIME_EXIT
        assert traj.payoff == cfg.payoff_at(traj.positions[-1])

    def test_step_budget(self):
        cfg = game_config(eps=0.1)
        t0 = 0.013
        budget = math.ceil(t0 / cfg.lookback_min)
        for seed in range(30):
            traj = pf.play(cfg, pf.ConstantB(cfg.big_c), (0.5, t0),
                           np.random.default_rng(seed))
            assert traj.tau <= budget

    def test_near_wall_exit_frequency(self):
        cfg = game_config(eps=0.1)
        hits = 0
        n = 4000
        for seed in range(n):
            traj = pf.play(cfg, pf.ConstantB(cfg.big_c), (1e-4, 5.0),
                           np.random.default_rng(seed))
            if traj.exit_kind == SPACE_EXIT and traj.tau == 1:
                hits += 1
        assert hits / n >= 0.49

    def test_clock_decrements(self):
        cfg = game_config(eps=0.1)
        traj = pf.play(cfg, pf.ConstantB(2 * cfg.big_c), (0.5, 0.02),
                       np.random.default_rng(1))
        dts = -np.diff(traj.times)
        assert np.allclose(dts, 2 * cfg.big_c * cfg.epsilon ** 2)
        steps = np.abs(np.diff(traj.positions))
        assert np.all(steps < cfg.epsilon)

    def test_rejects_bad_start(self):
        cfg = game_config(eps=0.1)
        with pytest.raises(ConfigError):
            pf.play(cfg, pf.ConstantB(cfg.big_c), (1.5, 0.1), np.random.default_rng(0))


class TestEstimateValue:
    def test_zero_datum_exact_zero(self):
        cfg = game_config(eps=0.1, u0_fn=lambda x: np.zeros_like(x))
        est = pf.estimate_value(cfg, pf.ConstantB(cfg.big_c), (0.5, 0.01), 200, seed=0)
        assert est.mean == 0.0 and est.stderr == 0.0

    def test_minimum_sample_size(self):
        cfg = game_config(eps=0.1)
        with pytest.raises(ConfigError):
            pf.estimate_value(cfg, pf.ConstantB(cfg.big_c), (0.5, 0.01), 10, seed=0)

    def test_bitwise_reproducible(self):
        cfg = game_config(eps=0.1)
        s = pf.ConstantB(cfg.big_c)
        a = pf.estimate_value(cfg, s, (0.5, 0.02), 2000, seed=9)
        b = pf.estimate_value(cfg, s, (0.5, 0.02), 2000, seed=9)
        assert a.mean == b.mean and a.stderr == b.stderr

    def test_threads_do_not_change_bits(self):
        cfg = game_config(eps=0.1)
        s = pf.ConstantB(cfg.big_c)
        a = pf.estimate_value(cfg, s, (0.5, 0.02), 3000, seed=9, chunk=512)
        b = pf.estimate_value(cfg, s, (0.5, 0.02), 3000, seed=9, chunk=512, threads=4)
        assert a.mean == b.mean

    def test_play_matches_lockstep_row(self):
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.02)
        strat = pf.TableGreedy(tbl)
        res = _run_chunk(cfg, strat, (0.5, 0.02), 77, 0, 4)
        for i in range(4):
            traj = pf.play(cfg, strat, (0.5, 0.02), np.random.default_rng(77 + i))
            assert traj.payoff == res["payoffs"][i]
            assert traj.tau == res["steps"][i]
            assert traj.exit_kind == res["kinds"][i]

    def test_payoff_support(self):
        cfg = game_config(eps=0.1, u0_fn=lambda x: np.sin(2 * np.pi * x))
        est = pf.estimate_value(cfg, pf.ConstantB(cfg.big_c), (0.5, 0.02), 500, seed=4)
        bound = cfg.u0.sup_norm()
        assert abs(est.mean) <= bound
        assert est.exit_counts[TIME_EXIT] + est.exit_counts[SPACE_EXIT] == 500

    def test_fixed_clock_matches_heat_flow(self):
        # a constant clock b turns the game into a random walk whose value
        # approximates the heat flow with kappa = b / C
        cfg = game_config(eps=0.02)
        b = cfg.big_c * 1.0
        est = pf.estimate_value(cfg, pf.ConstantB(b), (0.5, 0.05), 40_000, seed=21)
        oracle = pf.heat_series_solve(cfg.u0, 1.0, 0.05)
        target = float(oracle.values[cfg.domain.shape[0] // 2])
        assert abs(est.mean - target) <= 3 * est.half_width + 1.5 * cfg.epsilon

    def test_greedy_matches_table(self):
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.03)
        strat = pf.TableGreedy(tbl)
        start = (0.5, 0.025)
        est = pf.estimate_value(cfg, strat, start, 30_000, seed=5)
        assert abs(est.mean - tbl.value_at(*start)) <= 3 * est.half_width + 0.015

    def test_greedy_dominates_fixed_clocks(self):
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.03)
        start = (0.4, 0.025)
        greedy = pf.estimate_value(cfg, pf.TableGreedy(tbl), start, 20_000, seed=6)
        for b in (cfg.b_grid[0], cfg.b_grid[-1]):
            fixed = pf.estimate_value(cfg, pf.ConstantB(b), start, 20_000, seed=6)
            sigma = math.hypot(greedy.stderr, fixed.stderr)
            assert greedy.mean <= fixed.mean + 3 * sigma

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_estimate_within_datum_range(self, seed):
        cfg = game_config(eps=0.1)
        est = pf.estimate_value(cfg, pf.ConstantB(cfg.big_c), (0.3, 0.01),
                                150, seed=seed)
        assert -cfg.u0.sup_norm() <= est.mean <= cfg.u0.sup_norm()


class TestEndpointBySign:
    def test_runs_and_respects_bounds(self):
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.02)
        strat = pf.EndpointBySign(tbl)
        xs = np.array([0.3, 0.5, 0.7])
        ts = np.array([0.01, 0.015, 0.02])
        bs = strat.choose(cfg, xs, ts)
        assert np.all((bs >= cfg.b_grid[0] - 1e-15) & (bs <= cfg.b_grid[-1] + 1e-15))
        assert np.all(np.isin(bs, [cfg.b_grid[0], cfg.b_grid[-1]]))


class TestExitStats:
    def test_far_probability_small_near_wall(self):
        cfg = game_config(eps=1e-3, h_over=10)
        stats = pf.exit_stats(cfg, 1e-4, 0.0, a=0.2, n=3000, seed=1)
        assert stats.p_far <= 0.05
        assert stats.p_slow <= 0.05

    def test_support_bound(self):
        # no exit point can be farther than the domain diameter plus a step
        cfg = game_config(eps=0.05)
        stats = pf.exit_stats(cfg, 0.5, 0.0, a=1.0 + 0.05, n=500, seed=2)
        assert stats.p_far == 0.0

    def test_monotone_in_start_distance(self):
        cfg = game_config(eps=1e-3, h_over=10)
        r0 = 0.016
        results = [pf.exit_stats(cfg, r0 / f, 0.0, a=0.2, n=2500, seed=3)
                   for f in (1, 2, 4)]
        for a, b in zip(results, results[1:]):
            width = (a.p_far_interval[1] - a.p_far_interval[0]) \
                + (b.p_far_interval[1] - b.p_far_interval[0])
            assert b.p_far <= a.p_far + width
            width_s = (a.p_slow_interval[1] - a.p_slow_interval[0]) \
                + (b.p_slow_interval[1] - b.p_slow_interval[0])
            assert b.p_slow <= a.p_slow + width_s

    def test_wilson_interval_basics(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        lo0, hi0 = wilson_interval(0, 100)
        assert lo0 == 0.0 and hi0 < 0.09


class TestMartingale:
    def test_zero_datum_all_increments_zero(self):
        cfg = game_config(eps=0.1, u0_fn=lambda x: np.zeros_like(x))
        tbl = pf.dpp_solve(cfg, 0.02)
        rep = pf.martingale_diagnostic(tbl, cfg, pf.ConstantB(cfg.big_c),
                                       (0.5, 0.015), 300, seed=0)
        assert np.all(rep.step_means == 0.0)
        assert rep.terminal_mean == 0.0 and rep.start_value == 0.0

    def test_suboptimal_clock_drifts_up(self):
        # the stored value is the min over clocks, so any fixed clock is a
        # submartingale for it up to interpolation noise
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.03)
        rep = pf.martingale_diagnostic(tbl, cfg, pf.ConstantB(cfg.b_grid[-1]),
                                       (0.5, 0.025), 4000, seed=1)
        noise = 3 * rep.step_stderrs + 2e-3
        assert np.all(rep.step_means >= -noise)

    def test_greedy_terminal_consistency(self):
        cfg = game_config(eps=0.05)
        tbl = pf.dpp_solve(cfg, 0.03)
        rep = pf.martingale_diagnostic(tbl, cfg, pf.TableGreedy(tbl),
                                       (0.5, 0.025), 6000, seed=2)
        assert abs(rep.terminal_gap) <= 3 * rep.terminal_stderr + 0.015


def test_table_values_bulk_matches_scalar():
    cfg = game_config(eps=0.05)
    tbl = pf.dpp_solve(cfg, 0.03)
    rng = np.random.default_rng(0)
    xs = rng.uniform(0.05, 0.95, 50)
    ts = rng.uniform(0.001, 0.029, 50)
    bulk = table_values_bulk(tbl, xs, ts)
    for x, t, v in zip(xs, ts, bulk):
        assert abs(tbl.value_at(x, t) - v) < 1e-12


def test_play_2d_smoke():
    dom = pf.build_rectangle(1.0, 1.0, 0.02)
    u0 = pf.eigenpair(dom).phi
    cfg = pf.GameConfig(pf.Parameters(1.0, 4.0), u0, 0.2)
    traj = pf.play(cfg, pf.ConstantB(cfg.big_c), ((0.5, 0.5), 0.05),
                   np.random.default_rng(0))
    assert traj.positions.shape[1] == 2
    steps = np.linalg.norm(np.diff(traj.positions, axis=0), axis=1)
    assert np.all(steps < cfg.epsilon)
    assert traj.exit_kind in (TIME_EXIT, SPACE_EXIT)
    assert abs(traj.payoff) <= u0.sup_norm()


def test_endpoint_strategy_near_optimal_on_monotone_data():
    # for a positive decaying solution the value's time slope is negative,
    # so the endpoint rule picks the short clock, which is optimal here
    cfg = game_config(eps=0.05)
    tbl = pf.dpp_solve(cfg, 0.03)
    strat = pf.EndpointBySign(tbl)
    start = (0.5, 0.025)
    est = pf.estimate_value(cfg, strat, start, 20_000, seed=8)
    assert abs(est.mean - tbl.value_at(*start)) <= 3 * est.half_width + 0.02


def test_play_matches_lockstep_row_2d():
    dom = pf.build_rectangle(1.0, 1.0, 0.02)
    u0 = pf.eigenpair(dom).phi
    cfg = pf.GameConfig(pf.Parameters(1.0, 4.0), u0, 0.2)
    strat = pf.ConstantB(2 * cfg.big_c)
    start = ((0.4, 0.6), 0.05)
    res = _run_chunk(cfg, strat, start, 31, 0, 3)
    for i in range(3):
        traj = pf.play(cfg, strat, start, np.random.default_rng(31 + i))
        assert traj.payoff == res["payoffs"][i]
        assert traj.tau == res["steps"][i]
        assert traj.exit_kind == res["kinds"][i]


def test_trajectory_continuation_invariant():
    # every state but the last satisfies the continuation condition
    cfg = game_config(eps=0.1)
    for seed in range(20):
        traj = pf.play(cfg, pf.ConstantB(cfg.big_c), (0.3, 0.01),
                       np.random.default_rng(seed))
        for x, t in zip(traj.positions[:-1], traj.times[:-1]):
            assert 0.0 < x < 1.0 and t > 0
        x_end, t_end = traj.positions[-1], traj.times[-1]
        assert t_end <= cfg.time_floor or not 0.0 < x_end < 1.0
