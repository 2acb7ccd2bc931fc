"""Command dispatch and artifact emission.

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(stability bound, non-convergence), 4 failed oracle-check assertion.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import asymptotics, game as game_mod, obstacle, plots
from .config import RunConfig, load_config
from .dpp import (
    GameConfig,
    ball_second_moment_quadrature,
    dpp_alternate_solve,
    dpp_solve,
    mean_value_constant,
)
from .errors import ConfigError, NumericalError, PlastiflowError
from .evolve import ELASTO_PLASTIC, LAYER, SchemeConfig, integrate, limit_suite
from .exact import eigenpair, heat_series_solve, profile_eigen_overlap, separable_profile
from .grids import GridFunction, Parameters, build_interval, gamma_form, harmonic_reduce, laplacian
from .output import (
    atomic_write_text,
    canonical_json,
    fmt,
    write_dpp_table,
    write_grid_function,
    write_manifest,
    write_solution,
)

COMMANDS = ("solve", "layer", "project", "dpp", "dpp-alt", "game", "exit-stats",
            "fit-decay", "sweep-theta", "bisect-theta", "limits", "oracle-check")


def _scheme_config(cfg: RunConfig, kind: str) -> SchemeConfig:
    t_final = cfg.solver.get("T")
    if t_final is None:
        raise ConfigError("solver.T is required for evolution commands")
    coeff = float(cfg.solver.get("layer_coeff", 1.0))
    dt = cfg.scheme_dt(kind, coeff)
    stride = int(cfg.solver.get("stride", 0)) or max(
        1, int(math.ceil(t_final / dt)) // 200)
    return SchemeConfig(cfg.params, dt, float(t_final), kind, coeff, stride)


def _game_config(cfg: RunConfig) -> GameConfig:
    eps = cfg.game.get("epsilon")
    if eps is None:
        raise ConfigError("game.epsilon is required")
    big_c = cfg.game.get("C", "auto")
    big_c = None if big_c == "auto" else float(big_c)
    return GameConfig(cfg.params, cfg.u0(), float(eps), big_c,
                      int(cfg.game.get("K", 9)), cfg.game.get("delta_t"))


def _maybe_svg(cfg: RunConfig, out: Path, artifacts: list[str], sol):
    if "svg" not in cfg.output.get("formats", []):
        return
    positive = sol.sup_norms > 0
    style = plots.PlotStyle(log_y=bool(np.all(positive[1:])), title="decay",
                            x_label="t", y_label="sup norm")
    curves = [("sup_norm", sol.times[positive], sol.sup_norms[positive])]
    atomic_write_text(out / "decay.svg", plots.render_curves(curves, style))
    artifacts.append("decay.svg")


def cmd_solve(cfg: RunConfig, out: Path) -> list[str]:
    sol = integrate(cfg.u0(), _scheme_config(cfg, ELASTO_PLASTIC))
    artifacts = write_solution(sol, out)
    _maybe_svg(cfg, out, artifacts, sol)
    return artifacts


def cmd_layer(cfg: RunConfig, out: Path) -> list[str]:
    sol = integrate(cfg.u0(), _scheme_config(cfg, LAYER))
    artifacts = write_solution(sol, out)
    _maybe_svg(cfg, out, artifacts, sol)
    return artifacts


def cmd_project(cfg: RunConfig, out: Path) -> list[str]:
    result = obstacle.project_initial(cfg.u0())
    write_grid_function(out / "tilde_u0.csv", result.tilde_u0)
    report = {"sweeps": result.sweeps, "residual": result.residual,
              "contact_nodes": int(result.contact.sum())}
    atomic_write_text(out / "project.json", canonical_json(report) + "\n")
    artifacts = ["tilde_u0.csv", "project.json"]
    if cfg.domain.ndim == 1 and "svg" in cfg.output.get("formats", []):
        x = cfg.domain.axes[0]
        curves = [("u0", x, cfg.u0().values),
                  ("projected", x, result.tilde_u0.values)]
        atomic_write_text(out / "profile.svg", plots.render_curves(
            curves, plots.PlotStyle(title="obstacle projection")))
        artifacts.append("profile.svg")
    return artifacts


def cmd_dpp(cfg: RunConfig, out: Path, alternate: bool = False) -> list[str]:
    t_final = cfg.solver.get("T")
    if t_final is None:
        raise ConfigError("solver.T is required")
    gcfg = _game_config(cfg)
    table = dpp_alternate_solve(gcfg, float(t_final)) if alternate \
        else dpp_solve(gcfg, float(t_final))
    return write_dpp_table(table, out)


def _strategy_from(cfg: RunConfig, gcfg: GameConfig, t_final: float):
    spec = cfg.game.get("strategy", {"kind": "greedy"})
    kind = spec.get("kind", "greedy")
    if kind == "constant":
        return game_mod.ConstantB(float(spec.get("b", gcfg.big_c * gcfg.params.b_minus)))
    table = dpp_solve(gcfg, t_final)
    if kind == "greedy":
        return game_mod.TableGreedy(table)
    if kind == "endpoint":
        return game_mod.EndpointBySign(table)
    raise ConfigError(f"unknown strategy kind {kind!r}")


def cmd_game(cfg: RunConfig, out: Path, seed_override: int | None,
             threads: int) -> list[str]:
    gcfg = _game_config(cfg)
    start = cfg.game.get("start")
    if start is None:
        raise ConfigError("game.start = [x, t] is required")
    x0, t0 = (start[0], float(start[1])) if len(start) == 2 else (start[:-1], float(start[-1]))
    n = int(cfg.game.get("n", 10000))
    seed = int(seed_override if seed_override is not None else cfg.game.get("seed", 0))
    strategy = _strategy_from(cfg, gcfg, t0)
    est = game_mod.estimate_value(gcfg, strategy, (x0, t0), n, seed, threads=threads)
    report = {
        "estimate": est.mean, "stderr": est.stderr, "half_width_99": est.half_width,
        "n": est.n, "seed": est.seed, "exit_kinds": est.exit_counts,
        "step_histogram": {str(k): v for k, v in sorted(est.step_histogram.items())},
    }
    atomic_write_text(out / "game.json", json.dumps(report, sort_keys=True, indent=1) + "\n")
    return ["game.json"]


def cmd_exit_stats(cfg: RunConfig, out: Path, seed_override: int | None) -> list[str]:
    gcfg = _game_config(cfg)
    start = cfg.game.get("start")
    boundary = cfg.game.get("boundary_point", 0.0)
    a = float(cfg.game.get("a", 0.2))
    n = int(cfg.game.get("n", 10000))
    seed = int(seed_override if seed_override is not None else cfg.game.get("seed", 0))
    if start is None:
        raise ConfigError("game.start = [x, t] is required")
    stats = game_mod.exit_stats(gcfg, start[0], boundary, a, n, seed)
    report = {
        "p_far": stats.p_far, "p_far_interval": list(stats.p_far_interval),
        "p_slow": stats.p_slow, "p_slow_interval": list(stats.p_slow_interval),
        "n": stats.n, "mean_steps": stats.mean_steps, "a": a,
    }
    atomic_write_text(out / "exit_stats.json",
                      json.dumps(report, sort_keys=True, indent=1) + "\n")
    return ["exit_stats.json"]


def cmd_fit_decay(cfg: RunConfig, out: Path) -> list[str]:
    sol = integrate(cfg.u0(), _scheme_config(cfg, ELASTO_PLASTIC))
    window = cfg.analysis.get("window")
    fit = asymptotics.decay_fit(sol, tuple(window) if window else None)
    report = {
        "rate": fit.rate, "amplitude": fit.amplitude,
        "window": list(fit.window), "residual": fit.residual,
        "profile_distance": fit.profile_distance,
        "profile_scale": fit.profile_scale,
        "sign_change_in_window": fit.sign_change_in_window,
    }
    atomic_write_text(out / "fit.json", json.dumps(report, sort_keys=True, indent=1) + "\n")
    artifacts = write_solution(sol, out) + ["fit.json"]
    _maybe_svg(cfg, out, artifacts, sol)
    return artifacts


def cmd_sweep_theta(cfg: RunConfig, out: Path) -> list[str]:
    thetas = cfg.analysis.get("thetas")
    if thetas is None:
        raise ConfigError("analysis.thetas is required")
    budget = float(cfg.analysis.get("budget", 2.0))
    rows = asymptotics.sweep_theta(cfg.u0(), cfg.params.b_minus, thetas, budget)
    lines = ["theta,verdict,decision_time"]
    for theta, verdict, t in rows:
        lines.append(f"{fmt(theta)},{verdict},{fmt(t) if t is not None else ''}")
    atomic_write_text(out / "sweep.csv", "\n".join(lines) + "\n")
    return ["sweep.csv"]


def cmd_bisect_theta(cfg: RunConfig, out: Path) -> list[str]:
    bracket = cfg.analysis.get("bracket")
    if bracket is None:
        raise ConfigError("analysis.bracket is required")
    tol = float(cfg.analysis.get("tol_theta", 0.1))
    budget = float(cfg.analysis.get("budget", 2.5))
    (lo, hi), trace = asymptotics.bisect_theta_star(
        cfg.u0(), cfg.params.b_minus, tuple(bracket), tol, budget)
    lines = ["theta,verdict,decision_time"]
    for theta, verdict, t in trace:
        lines.append(f"{fmt(theta)},{verdict},{fmt(t) if t is not None else ''}")
    lines.append(f"# bracket,{fmt(lo)},{fmt(hi)}")
    atomic_write_text(out / "bisect.csv", "\n".join(lines) + "\n")
    atomic_write_text(out / "bracket.json",
                      canonical_json({"lo": lo, "hi": hi, "width": hi - lo}) + "\n")
    return ["bisect.csv", "bracket.json"]


def cmd_limits(cfg: RunConfig, out: Path) -> list[str]:
    times = cfg.analysis.get("times", [0.1, 0.2])
    reports = limit_suite(cfg.u0(), cfg.params,
                          small_b_minus=cfg.analysis.get("b_minus_list"),
                          large_b_plus=cfg.analysis.get("b_plus_list"),
                          times=times)
    lines = ["mode,parameter,time,gap"]
    for rep in reports:
        for i, p in enumerate(rep.parameter_values):
            for j, t in enumerate(rep.times):
                lines.append(f"{rep.mode},{fmt(p)},{fmt(t)},{fmt(rep.gaps[i, j])}")
    atomic_write_text(out / "limits.csv", "\n".join(lines) + "\n")
    return ["limits.csv"]


def oracle_checks() -> list[tuple[str, bool, str]]:
    """Fast self-test of every closed-form identity the solvers lean on."""
    checks = []

    def add(name, ok, detail=""):
        checks.append((name, bool(ok), detail))

    p = Parameters(1.0, 4.0)
    g, scale = gamma_form(p)
    add("gamma-form", abs(g - 0.6) < 1e-12 and abs(scale - 0.4) < 1e-12,
        f"gamma={g}, scale={scale}")
    add("gamma-roundtrip",
        abs((1 + g) / scale - 4.0) < 1e-12 and abs((1 - g) / scale - 1.0) < 1e-12)

    dom = build_interval(1.0, 1.0 / 256)
    eig = eigenpair(dom)
    add("eigenvalue-interval", abs(eig.lam - math.pi ** 2) < 1e-12, f"lam={eig.lam}")

    x = dom.axes[0]
    quad = GridFunction(dom, x * (1 - x))
    lap = laplacian(quad)
    add("laplacian-quadratic",
        np.max(np.abs(lap.values[1:-1] + 2.0)) < 1e-9)

    u0 = eig.phi
    amp = heat_series_solve(u0, 1.0, 0.1).values[dom.shape[0] // 2]
    add("heat-series-mode", abs(amp - math.exp(-math.pi ** 2 / 10)) < 1e-10,
        f"amplitude={amp}")

    prof = separable_profile(4.0)
    add("separable-geometry",
        abs(prof.a - 1 / 3) < 1e-12 and abs(prof.k - 0.5) < 1e-12
        and abs(prof.omega - 2.25 * math.pi ** 2) < 1e-10)
    add("separable-value", abs(prof(1 / 6) + 0.5) < 1e-12, f"psi(1/6)={prof(1 / 6)}")

    for a in (0.2, 1 / 3, 0.45):
        xs = np.linspace(0, 1, 20001)
        prof_a = separable_profile((1 - a) ** 2 / a ** 2)
        quad_val = np.trapezoid(prof_a(xs) * np.sin(np.pi * xs), xs)
        add(f"overlap-quadrature-a={a:.3g}",
            abs(quad_val - profile_eigen_overlap(a)) < 1e-6,
            f"closed={profile_eigen_overlap(a)}, quad={quad_val}")

    for dim in (1, 2, 3):
        mc = 0.5 * ball_second_moment_quadrature(dim)
        add(f"clock-constant-N={dim}", abs(mc - mean_value_constant(dim)) < 1e-4,
            f"formula={mean_value_constant(dim)}, quadrature={mc}")

    dom2 = build_interval(1.0, 1.0 / 128)
    rng = np.random.default_rng(11)
    bumps = np.sin(np.pi * dom2.axes[0]) * (0.3 + rng.standard_normal(dom2.shape[0]) * 0.1)
    bumps[0] = bumps[-1] = 0.0
    probe = GridFunction(dom2, bumps)
    proj = obstacle.project_initial(probe, tol=1e-12)
    hull = obstacle.convex_envelope_1d(probe)
    add("obstacle-vs-hull",
        np.max(np.abs(proj.tilde_u0.values - hull.values)) < 1e-8)

    from .grids import build_rectangle
    dr = build_rectangle(1.0, 1.0, 0.05)
    xg, yg = dr.coords()
    gf = GridFunction(dr, np.zeros(dr.shape))
    _, v = harmonic_reduce(gf, xg)
    add("harmonic-affine-2d", np.max(np.abs(v.values - xg)) < 1e-8)
    return checks


def cmd_oracle_check(out: Path) -> tuple[list[str], bool]:
    checks = oracle_checks()
    lines = []
    for name, ok, detail in checks:
        tag = "PASS" if ok else "FAIL"
        lines.append(f"{tag} {name}" + (f" ({detail})" if detail else ""))
    report = {"checks": [{"name": n, "pass": ok, "detail": d} for n, ok, d in checks],
              "all_pass": all(ok for _, ok, _ in checks)}
    atomic_write_text(out / "oracle_check.json",
                      json.dumps(report, sort_keys=True, indent=1) + "\n")
    return lines, report["all_pass"]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plastiflow",
        description="Solvers and games for the two-coefficient nonlinear heat law")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config output.directory, else ./out)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("PLASTIFLOW_THREADS", "1"))

    def say(msg):
        if not args.quiet:
            print(msg)

    t_start = time.perf_counter()
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config)
        out = args.out
        if out is None:
            out = Path(cfg.output["directory"]) if cfg and "directory" in cfg.output \
                else Path("out")
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "oracle-check":
            lines, all_pass = cmd_oracle_check(out)
            for ln in lines:
                say(ln)
            write_manifest(out, {"command": "oracle-check"},
                           ["oracle_check.json"], time.perf_counter() - t_start)
            return 0 if all_pass else 4

        if cfg is None:
            raise ConfigError("--config is required for this command")
        dispatch = {
            "solve": lambda: cmd_solve(cfg, out),
            "layer": lambda: cmd_layer(cfg, out),
            "project": lambda: cmd_project(cfg, out),
            "dpp": lambda: cmd_dpp(cfg, out, alternate=False),
            "dpp-alt": lambda: cmd_dpp(cfg, out, alternate=True),
            "game": lambda: cmd_game(cfg, out, args.seed, threads),
            "exit-stats": lambda: cmd_exit_stats(cfg, out, args.seed),
            "fit-decay": lambda: cmd_fit_decay(cfg, out),
            "sweep-theta": lambda: cmd_sweep_theta(cfg, out),
            "bisect-theta": lambda: cmd_bisect_theta(cfg, out),
            "limits": lambda: cmd_limits(cfg, out),
        }
        artifacts = dispatch[args.command]()
        write_manifest(out, cfg.raw, artifacts, time.perf_counter() - t_start,
                       extra={"command": args.command, "seed": args.seed})
        say(f"wrote {len(artifacts)} artifact(s) to {out}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except PlastiflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
