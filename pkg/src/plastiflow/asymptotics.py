"""Large-time analysis: decay-rate fits, best-fit constants, sign classification.

The long-run fate of a sign-changing datum depends on the coefficient ratio
theta = b_plus/b_minus through a critical value: below it the solution ends
up positive and decays at lambda/b_minus, above it negative with rate
lambda/b_plus.  The classifier runs the explicit solver until one snapshot
is uniformly signed; a bisection on the verdict recovers the critical
ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BadBracket, DomainMismatch, WindowEmpty
from .evolve import (
    SIGN_MIXED,
    Solution,
    auto_config,
    ep_rhs_array,
    sign_pattern,
)
from .exact import EigenPair, eigenpair
from .grids import GridFunction, Parameters, trapezoid_weights


def projection(u: GridFunction, phi: GridFunction) -> float:
    """Trapezoid quadrature of u * phi over the shared domain."""
    if not u.domain.same_as(phi.domain):
        raise DomainMismatch("projection requires matching domains")
    return float(np.sum(trapezoid_weights(u.domain) * u.values * phi.values))


PHI_FLOOR = 1e-6


def best_fit_constant(sol: Solution, eig: EigenPair, rate: float, t: float) -> float:
    """Smallest k with u(.,t) <= k e^{-rate t} phi, over nodes with phi >= 1e-6.

    For positive solutions this is the classical best-fitting constant; it
    is non-increasing in t when `rate` matches the scheme's slow decay.
    """
    u = sol.snapshot(t)
    phi = eig.phi.values
    mask = phi >= PHI_FLOOR
    ratios = u.values[mask] * math.exp(rate * t) / phi[mask]
    return float(np.max(ratios))


@dataclass
class DecayFit:
    rate: float                   # fitted decay exponent (positive = decay)
    amplitude: float              # signed prefactor at t = 0
    window: tuple[float, float]
    residual: float               # rms residual of the log-linear fit
    profile_distance: float       # min_s ||u(T2) e^{rate T2} - s ref||_inf / ||ref||_inf
    profile_scale: float          # the minimizing s
    sign_change_in_window: bool


def _default_window(sol: Solution) -> tuple[float, float]:
    alive = sol.times[(sol.sup_norms >= 1e-10) & (sol.times > 0)]
    if alive.size < 2:
        raise WindowEmpty("no snapshots above the sup-norm floor")
    t_end = float(alive[-1])
    return (t_end / 10.0, t_end)


def decay_fit(sol: Solution, window: tuple[float, float] | None = None,
              reference: GridFunction | None = None) -> DecayFit:
    """Least-squares decay exponent of log sup-norm over a time window.

    The terminal snapshot, rescaled by the fitted exponential, is matched
    against the reference profile (the eigenfunction by default) in the
    best uniform sense over a scalar multiple.
    """
    if window is None:
        window = _default_window(sol)
    t1, t2 = window
    if not t1 < t2:
        raise WindowEmpty(f"bad window {window}")
    sel = (sol.times >= t1 - 1e-12) & (sol.times <= t2 + 1e-12) & (sol.sup_norms > 0)
    if np.sum(sel) < 2:
        raise WindowEmpty("fewer than two usable snapshots in the window")
    ts = sol.times[sel]
    logs = np.log(sol.sup_norms[sel])
    slope, intercept = np.polyfit(ts, logs, 1)
    residual = float(np.sqrt(np.mean((slope * ts + intercept - logs) ** 2)))
    rate = -float(slope)

    patterns = [p for p, keep in zip(sol.sign_patterns, sel) if keep]
    sign_change = any(p == SIGN_MIXED for p in patterns) or len(set(patterns)) > 1
    last_idx = int(np.nonzero(sel)[0][-1])
    last = sol.fields[last_idx]
    t_last = float(sol.times[last_idx])
    peak = last.flat[int(np.argmax(np.abs(last)))]
    amplitude = math.copysign(math.exp(intercept), peak if peak != 0 else 1.0)

    if reference is None:
        reference = sol.eigen.phi
    ref = reference.values
    ref_norm = float(np.max(np.abs(ref)))
    rescaled = last * math.exp(rate * t_last)
    scale0 = float(np.max(np.abs(rescaled))) / ref_norm

    def dist(s):
        return float(np.max(np.abs(rescaled - s * ref))) / ref_norm

    res = minimize_scalar(dist, bounds=(-4 * scale0 - 1e-12, 4 * scale0 + 1e-12),
                          method="bounded", options={"xatol": 1e-13})
    return DecayFit(rate, amplitude, (float(t1), float(t2)), residual,
                    float(res.fun), float(res.x), sign_change)


VERDICT_A = "A"                  # ends up nonnegative, slow rate lambda/b_minus
VERDICT_B = "B"                  # ends up nonpositive, rate lambda/b_plus
VERDICT_UNRESOLVED = "Unresolved"

SIGN_TOL_FACTOR = 1e-6


@dataclass
class ThetaClassification:
    verdict: str
    decision_time: float | None
    terminal_pattern: str
    projection_trace: np.ndarray  # (time, integral of u phi) rows
    theta: float
    notes: dict = field(default_factory=dict)


def classify_theta(u0: GridFunction, b_minus: float, theta: float,
                   budget: float, tol_factor: float = SIGN_TOL_FACTOR,
                   snapshots: int = 250) -> ThetaClassification:
    """Evolve with (b_minus, theta*b_minus) until one sign wins.

    Verdict A at the first snapshot that is uniformly >= -tol (tol =
    tol_factor * sup|u0|); by comparison with the positive eigen-solution
    it stays so.  Verdict B mirrors this.  If the whole field decays below
    tol before either fires, or the budget runs out, the case is
    Unresolved.  The projection onto the eigenfunction is recorded per
    snapshot as a trace but does not decide the verdict.
    """
    params = Parameters(b_minus, theta * b_minus)
    dom = u0.domain
    cfg = auto_config(dom, params, budget)
    steps = max(1, int(math.ceil(budget / cfg.dt - 1e-9)))
    stride = max(1, steps // snapshots)
    tol = tol_factor * u0.sup_norm()
    weights = trapezoid_weights(dom)
    phi = eigenpair(dom).phi.values
    bmask = dom.boundary_mask
    v = u0.values.copy()
    v[bmask] = 0.0
    bm, bp = params.b_minus, params.b_plus
    trace = [(0.0, float(np.sum(weights * v * phi)))]

    def check(field):
        lo, hi = float(field.min()), float(field.max())
        if lo >= -tol:
            return VERDICT_A
        if hi <= tol:
            return VERDICT_B
        return None

    verdict = check(v)
    t = 0.0
    if verdict is None:
        for step in range(1, steps + 1):
            v = v + cfg.dt * ep_rhs_array(v, dom.h, bm, bp)
            v[bmask] = 0.0
            if step % stride == 0 or step == steps:
                t = step * cfg.dt
                trace.append((t, float(np.sum(weights * v * phi))))
                if np.max(np.abs(v)) < tol:
                    verdict = VERDICT_UNRESOLVED
                    break
                verdict = check(v)
                if verdict is not None:
                    break
    if verdict is None or verdict == VERDICT_UNRESOLVED:
        return ThetaClassification(VERDICT_UNRESOLVED, None, sign_pattern(v),
                                   np.array(trace), theta,
                                   notes={"budget": budget})
    return ThetaClassification(verdict, t, sign_pattern(v), np.array(trace), theta)


def bisect_theta_star(u0: GridFunction, b_minus: float,
                      bracket: tuple[float, float], tol_theta: float,
                      budget: float, max_budget_doublings: int = 2):
    """Bisection on the classification verdict.

    Requires classify(lo) = A and classify(hi) = B.  An Unresolved midpoint
    retries with a doubled budget; if it stays unresolved the current
    bracket is returned with the trace recording the blockage.
    Returns ((lo, hi), trace) where trace rows are
    (theta, verdict, decision_time).
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise BadBracket(f"need lo < hi, got {bracket}")
    trace: list[tuple[float, str, float | None]] = []

    def classify(theta, b):
        result = classify_theta(u0, b_minus, theta, b)
        trace.append((theta, result.verdict, result.decision_time))
        return result.verdict

    if classify(lo, budget) != VERDICT_A:
        raise BadBracket(f"lower endpoint theta={lo} did not classify as A")
    if classify(hi, budget) != VERDICT_B:
        raise BadBracket(f"upper endpoint theta={hi} did not classify as B")

    while hi - lo > tol_theta:
        mid = 0.5 * (lo + hi)
        verdict = classify(mid, budget)
        doublings = 0
        b = budget
        while verdict == VERDICT_UNRESOLVED and doublings < max_budget_doublings:
            b *= 2.0
            doublings += 1
            verdict = classify(mid, b)
        if verdict == VERDICT_A:
            lo = mid
        elif verdict == VERDICT_B:
            hi = mid
        else:
            break
    return (lo, hi), trace


def sweep_theta(u0: GridFunction, b_minus: float, thetas, budget: float):
    """Classification verdicts over a theta grid; rows (theta, verdict, time)."""
    rows = []
    for theta in thetas:
        res = classify_theta(u0, b_minus, theta, budget)
        rows.append((float(theta), res.verdict, res.decision_time))
    return rows
