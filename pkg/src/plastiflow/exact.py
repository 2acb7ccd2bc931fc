"""Closed-form and spectral reference solutions used as ground truth.

Contains the first Dirichlet eigenpair, a sine-series heat solver on the
interval, the two-lobe separable solutions with their tiled variants, the
profile-eigenfunction overlap integral, and the exponential decay
envelopes.  Profiles are evaluated analytically and only then restricted
to grids, so any discretization error belongs to the consumer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTheta, InvalidTiling, UnsupportedDomain
from .grids import Domain, GridFunction, Interval, Parameters, Rectangle

DEFAULT_MODES = 256
MIN_MODES = 64


@dataclass
class EigenPair:
    """First Dirichlet eigenfunction (positive, discrete max 1) and eigenvalue."""

    phi: GridFunction
    lam: float


def eigenpair(domain: Domain) -> EigenPair:
    """sin-product eigenfunction of the interval / rectangle.

    The nodal field is normalized by its discrete maximum, which equals the
    analytic restriction whenever the grid contains the peak.
    """
    if isinstance(domain.kind, Interval):
        length = domain.kind.length
        vals = np.sin(np.pi * domain.axes[0] / length)
        lam = (np.pi / length) ** 2
    elif isinstance(domain.kind, Rectangle):
        lx, ly = domain.kind.lx, domain.kind.ly
        x, y = domain.coords()
        vals = np.sin(np.pi * x / lx) * np.sin(np.pi * y / ly)
        lam = (np.pi / lx) ** 2 + (np.pi / ly) ** 2
    else:
        raise UnsupportedDomain(f"no eigenpair for {domain.kind!r}")
    vals = vals / np.max(vals)
    vals[domain.boundary_mask] = 0.0
    return EigenPair(GridFunction(domain, vals), float(lam))


@dataclass
class HeatSeries:
    """Sine-series representation of interval heat flow with diffusivity 1/kappa.

    coefficients[n-1] is the trapezoid estimate of 2/L * integral of
    u0(x) sin(n pi x / L); tail_bound sums |c_n| of the resolvable modes
    dropped by truncation, an L-infinity bound for the t=0 reconstruction
    error.
    """

    domain: Domain
    kappa: float
    coefficients: np.ndarray
    tail_bound: float

    def evaluate(self, t: float) -> GridFunction:
        length = self.domain.kind.length
        x = self.domain.axes[0]
        n = np.arange(1, self.coefficients.size + 1)
        rates = (n * np.pi / length) ** 2 / self.kappa
        amps = self.coefficients * np.exp(-rates * t)
        vals = np.sin(np.outer(x, n * np.pi / length)) @ amps
        vals[0] = vals[-1] = 0.0
        return GridFunction(self.domain, vals, time=t)


def heat_series(u0: GridFunction, kappa: float, n_modes: int = DEFAULT_MODES) -> HeatSeries:
    dom = u0.domain
    if not isinstance(dom.kind, Interval):
        raise UnsupportedDomain("heat series requires an interval domain")
    if n_modes < MIN_MODES:
        raise ValueError(f"n_modes must be >= {MIN_MODES}")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    length = dom.kind.length
    x = dom.axes[0]
    n_resolvable = dom.shape[0] - 2  # the grid's discrete sine modes
    n_all = max(n_modes, n_resolvable)
    modes = np.arange(1, n_all + 1)
    # composite trapezoid; u0 vanishes at the endpoints so interior nodes carry it
    basis = np.sin(np.outer(modes * np.pi / length, x[1:-1]))
    coeffs = (2.0 / length) * dom.h * (basis @ u0.values[1:-1])
    kept = coeffs[:n_modes]
    tail = float(np.sum(np.abs(coeffs[n_modes:])))
    return HeatSeries(dom, float(kappa), kept, tail)


def heat_series_solve(u0: GridFunction, kappa: float, t: float,
                      n_modes: int = DEFAULT_MODES) -> GridFunction:
    """Spectral solution of kappa * du/dt = Lap u from u0 at time t."""
    return heat_series(u0, kappa, n_modes).evaluate(t)


TILE_LAYOUTS = (1, 2, 3, 4)


@dataclass(frozen=True)
class Tiling:
    """Restriction of the periodized two-lobe profile to [0, 1].

    layout selects how the tiles are scaled/shifted: 1 compresses m full
    periods, 2 appends the extra negative lobe, 3 starts on the positive
    lobe, 4 both starts and ends on positive lobes (needs m >= 2).
    """

    m: int
    layout: int


@dataclass(frozen=True)
class SeparableProfile:
    """Sign-changing profile whose separable evolution decays at a single rate.

    On (0, a) the profile is -k sin(pi x / a), on (a, 1) it is
    sin(pi (x - a) / (1 - a)); k = a/(1-a) makes the one-sided derivatives
    match at the interface.  The corresponding decay rate for coefficients
    (b_minus, theta*b_minus) is omega = pi^2 (1 + 1/sqrt(theta))^2 / b_minus,
    multiplied by the squared tiling factor for tiled variants.
    """

    a: float
    k: float
    omega: float
    theta: float
    b_minus: float
    variant: Tiling | None = None

    @property
    def tile_factor(self) -> float:
        if self.variant is None:
            return 1.0
        m, j = self.variant.m, self.variant.layout
        return {1: m, 2: m + self.a, 3: m, 4: m - self.a}[j]

    @property
    def decay_rate(self) -> float:
        return self.tile_factor ** 2 * self.omega

    def _base(self, x: np.ndarray) -> np.ndarray:
        a = self.a
        left = -self.k * np.sin(np.pi * x / a)
        right = np.sin(np.pi * (x - a) / (1.0 - a))
        return np.where(x < a, left, right)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.variant is None:
            y = x
        else:
            offset = 0.0 if self.variant.layout in (1, 2) else self.a
            y = self.tile_factor * x + offset
        vals = self._base(np.mod(y, 1.0))
        # exact zeros at the lattice of interface/period points
        vals = np.where(np.isclose(np.mod(y, 1.0), 0.0, atol=1e-14), 0.0, vals)
        return vals if vals.shape else float(vals)

    def on_grid(self, domain: Domain, time: float | None = None) -> GridFunction:
        if not isinstance(domain.kind, Interval) or domain.kind.length != 1.0:
            raise UnsupportedDomain("separable profiles live on the unit interval")
        vals = self(domain.axes[0])
        vals[0] = vals[-1] = 0.0
        return GridFunction(domain, vals, time)


def separable_profile(theta: float, variant: Tiling | None = None,
                      b_minus: float = 1.0) -> SeparableProfile:
    if not theta > 1.0:
        raise InvalidTheta(f"theta must exceed 1, got {theta}")
    if variant is not None:
        if variant.layout not in TILE_LAYOUTS:
            raise InvalidTiling(f"unknown layout {variant.layout}")
        if variant.m < 1:
            raise InvalidTiling("tile count must be >= 1")
        if variant.layout == 4 and variant.m < 2:
            raise InvalidTiling("layout 4 with m=1 degenerates to the eigenfunction")
    rt = math.sqrt(theta)
    a = 1.0 / (1.0 + rt)
    k = a / (1.0 - a)
    omega = math.pi ** 2 * (1.0 + 1.0 / rt) ** 2 / b_minus
    return SeparableProfile(a=a, k=k, omega=omega, theta=theta,
                            b_minus=b_minus, variant=variant)


def profile_for_interface(a: float, variant: Tiling | None = None,
                          b_minus: float = 1.0) -> SeparableProfile:
    """Profile pinned by its interface location a in (0, 1/2)."""
    if not 0.0 < a < 0.5:
        raise InvalidTheta(f"interface must lie in (0, 1/2), got {a}")
    theta = (1.0 - a) ** 2 / a ** 2
    return separable_profile(theta, variant, b_minus)


def separable_solution(profile: SeparableProfile, x, t: float):
    """Value of the separable solution exp(-rate t) * profile(x)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.exp(-profile.decay_rate * t) * profile(x)


def profile_eigen_overlap(a: float) -> float:
    """Integral of the base profile against sin(pi x) over (0, 1).

    Closed form (1-2a) sin(a pi) / (a (2-a) (1-a)^2 (1+a) pi); positive
    exactly when a < 1/2.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0,1), got {a}")
    num = (1.0 - 2.0 * a) * math.sin(a * math.pi)
    den = a * (2.0 - a) * (1.0 - a) ** 2 * (1.0 + a) * math.pi
    return num / den


def decay_envelopes(p: Parameters, eig: EigenPair, c1: float, c2: float,
                    t: float) -> tuple[GridFunction, GridFunction]:
    """Exponential barriers c1 e^{-lambda1 t} phi and -c2 e^{-lambda2 t} phi."""
    if c1 < 0 or c2 < 0:
        raise ValueError("envelope constants must be nonnegative")
    p = p if p.eigenvalue is not None else p.with_eigenvalue(eig.lam)
    upper = c1 * math.exp(-p.lambda1 * t) * eig.phi.values
    lower = -c2 * math.exp(-p.lambda2 * t) * eig.phi.values
    dom = eig.phi.domain
    return GridFunction(dom, upper, t), GridFunction(dom, lower, t)
