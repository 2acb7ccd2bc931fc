"""Domains, uniform grids, nodal fields and the shared discrete operators.

Everything downstream (time steppers, obstacle projection, game lattices)
works on the uniform interval / rectangle grids built here.  Fields are
plain float64 arrays wrapped in :class:`GridFunction`; operators return new
arrays and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DomainMismatch,
    GridMisaligned,
    NoConvergence,
    NonFiniteInput,
    NonPositiveExtent,
    UnsupportedDomain,
)

ALIGNMENT_TOL = 1e-12
HARMONIC_RESIDUAL_TOL = 1e-10
HARMONIC_SWEEP_CAP = 1_000_000


@dataclass(frozen=True)
class Interval:
    length: float


@dataclass(frozen=True)
class Rectangle:
    lx: float
    ly: float


@dataclass(frozen=True)
class Parameters:
    """The coefficient pair (b_minus, b_plus) of b(s)s = Δu.

    b_minus applies where the field decreases in time, b_plus where it
    increases.  An eigenvalue can be attached to expose the slow decay
    rates lambda1 = lam/b_minus and lambda2 = lam/b_plus.
    """

    b_minus: float
    b_plus: float
    eigenvalue: float | None = None

    def __post_init__(self):
        if not (self.b_minus > 0 and np.isfinite(self.b_minus)):
            raise ValueError(f"b_minus must be positive, got {self.b_minus}")
        if not (self.b_plus > 0 and np.isfinite(self.b_plus)):
            raise ValueError(f"b_plus must be positive, got {self.b_plus}")

    @property
    def theta(self) -> float:
        return self.b_plus / self.b_minus

    @property
    def gamma(self) -> float:
        return (self.b_plus - self.b_minus) / (self.b_plus + self.b_minus)

    def with_eigenvalue(self, lam: float) -> "Parameters":
        return replace(self, eigenvalue=float(lam))

    @property
    def lambda1(self) -> float:
        if self.eigenvalue is None:
            raise ValueError("no eigenvalue attached to Parameters")
        return self.eigenvalue / self.b_minus

    @property
    def lambda2(self) -> float:
        if self.eigenvalue is None:
            raise ValueError("no eigenvalue attached to Parameters")
        return self.eigenvalue / self.b_plus


def gamma_form(p: Parameters) -> tuple[float, float]:
    """Rewrite (b_minus, b_plus) as the skew coefficient and time scale.

    Returns (gamma, scale) with gamma = (b+ - b-)/(b+ + b-) and
    scale = 2/(b- + b+); the pair round-trips via b± = (1 ± gamma)/scale.
    """
    return p.gamma, 2.0 / (p.b_minus + p.b_plus)


class Domain:
    """Uniform grid over an interval (0, L) or rectangle (0,Lx)x(0,Ly).

    Nodes are stored x-major: 1D values have shape (nx,), 2D values
    (nx, ny), so ``values.ravel()`` enumerates nodes in lexicographic
    (x, y) order.
    """

    def __init__(self, kind: Interval | Rectangle, h: float):
        if isinstance(kind, Interval):
            extents = (kind.length,)
        elif isinstance(kind, Rectangle):
            extents = (kind.lx, kind.ly)
        else:
            raise UnsupportedDomain(f"unknown domain kind {kind!r}")
        for ext in extents:
            if not (ext > 0 and np.isfinite(ext)):
                raise NonPositiveExtent(f"extent must be positive, got {ext}")
        if not (h > 0 and np.isfinite(h)):
            raise NonPositiveExtent(f"grid spacing must be positive, got {h}")
        counts = []
        for ext in extents:
            n = int(round(ext / h))
            if n < 1 or abs(n * h - ext) > ALIGNMENT_TOL * max(1.0, ext):
                raise GridMisaligned(
                    f"h={h} does not tile extent {ext} (n*h={n * h})")
            counts.append(n + 1)
        self.kind = kind
        self.h = float(h)
        self.shape = tuple(counts)
        self.axes = tuple(np.linspace(0.0, ext, n) for ext, n in zip(extents, counts))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def coords(self):
        """Node coordinates, shaped like a nodal field."""
        if self.ndim == 1:
            return self.axes[0]
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        if self.ndim == 1:
            mask[0] = mask[-1] = True
        else:
            mask[0, :] = mask[-1, :] = True
            mask[:, 0] = mask[:, -1] = True
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def same_as(self, other: "Domain") -> bool:
        return self.kind == other.kind and self.shape == other.shape

    def __repr__(self):
        return f"Domain({self.kind}, h={self.h})"


def build_domain(kind: str, extent, h: float) -> Domain:
    """Build a grid from a (kind, extent, h) triple.

    kind "interval" takes a scalar extent, "rectangle" a pair (lx, ly).
    """
    if kind == "interval":
        return Domain(Interval(float(extent)), h)
    if kind == "rectangle":
        lx, ly = extent
        return Domain(Rectangle(float(lx), float(ly)), h)
    raise UnsupportedDomain(f"unknown domain kind {kind!r}")


def build_interval(length: float, h: float) -> Domain:
    return Domain(Interval(length), h)


def build_rectangle(lx: float, ly: float, h: float) -> Domain:
    return Domain(Rectangle(lx, ly), h)


@dataclass
class GridFunction:
    """One real value per node of a domain, optionally time-stamped."""

    domain: Domain
    values: np.ndarray
    time: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise DomainMismatch(
                f"values shape {self.values.shape} != grid {self.domain.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteInput("grid function contains non-finite values")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "GridFunction":
        return GridFunction(self.domain, values, time)

    def to_csv(self) -> str:
        """Serialize as ``x[,y],value`` rows in lexicographic node order."""
        lines = []
        if self.domain.ndim == 1:
            lines.append("x,value")
            x = self.domain.axes[0]
            for xi, vi in zip(x, self.values):
                lines.append(f"{xi:.17g},{vi:.17g}")
        else:
            lines.append("x,y,value")
            xs, ys = self.domain.axes
            for i, xi in enumerate(xs):
                for j, yj in enumerate(ys):
                    lines.append(f"{xi:.17g},{yj:.17g},{self.values[i, j]:.17g}")
        return "\n".join(lines) + "\n"


def laplacian_array(values: np.ndarray, h: float) -> np.ndarray:
    """Central 3/5-point Laplacian on homogeneous-Dirichlet data.

    Boundary entries of the input are forced to zero before stencils are
    applied; boundary entries of the output are zero.
    """
    out = np.zeros_like(values)
    h2 = h * h
    if values.ndim == 1:
        v = values.copy()
        v[0] = v[-1] = 0.0
        out[1:-1] = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / h2
    else:
        v = values.copy()
        v[0, :] = v[-1, :] = 0.0
        v[:, 0] = v[:, -1] = 0.0
        out[1:-1, 1:-1] = (
            v[:-2, 1:-1] + v[2:, 1:-1] + v[1:-1, :-2] + v[1:-1, 2:]
            - 4.0 * v[1:-1, 1:-1]
        ) / h2
    return out


def laplacian(u: GridFunction) -> GridFunction:
    return u.with_values(laplacian_array(u.values, u.domain.h), u.time)


def neighbor_average(values: np.ndarray) -> np.ndarray:
    """Mean of the 2/4 stencil neighbours at interior nodes; boundary copied."""
    out = values.copy()
    if values.ndim == 1:
        out[1:-1] = 0.5 * (values[:-2] + values[2:])
    else:
        out[1:-1, 1:-1] = 0.25 * (
            values[:-2, 1:-1] + values[2:, 1:-1]
            + values[1:-1, :-2] + values[1:-1, 2:]
        )
    return out


def raw_laplacian_residual(values: np.ndarray, h: float) -> float:
    """Sup of the plain central Laplacian at interior nodes, no boundary clamp."""
    avg = neighbor_average(values)
    stencil = 2 * values.ndim / (h * h)
    inner = (avg - values)[1:-1] if values.ndim == 1 else (avg - values)[1:-1, 1:-1]
    return float(np.max(np.abs(inner)) * stencil)


def harmonic_reduce(u0: GridFunction, g: np.ndarray) -> tuple[GridFunction, GridFunction]:
    """Split off the discrete harmonic extension of boundary data.

    Returns (w0, v) with v solving the discrete Laplace equation, v = g on
    the boundary, and w0 = u0 - v, so that u0 = w0 + v exactly.  The 1D
    extension is the affine interpolant of the endpoint values.  In 2D the
    extension is relaxed with red/black Gauss-Seidel sweeps until the sup
    norm of the discrete Laplacian falls below 1e-10; each update is an
    average of current values, so iterates never leave [min g, max g].
    """
    dom = u0.domain
    g = np.asarray(g, dtype=float)
    if g.shape != dom.shape:
        raise DomainMismatch(f"boundary data shape {g.shape} != grid {dom.shape}")
    if not np.all(np.isfinite(g[dom.boundary_mask])):
        raise NonFiniteInput("boundary data contains non-finite values")

    if dom.ndim == 1:
        x = dom.axes[0]
        length = x[-1]
        v = g[0] + (x / length) * (g[-1] - g[0])
        v[0], v[-1] = g[0], g[-1]
    else:
        bmask = dom.boundary_mask
        v = np.full(dom.shape, 0.5 * (g[bmask].min() + g[bmask].max()))
        v[bmask] = g[bmask]
        nx, ny = dom.shape
        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        red = ((ix + iy) % 2 == 0) & ~bmask
        black = ((ix + iy) % 2 == 1) & ~bmask
        for sweep in range(HARMONIC_SWEEP_CAP):
            for color in (red, black):
                avg = neighbor_average(v)
                v[color] = avg[color]
            if sweep % 8 == 0:
                if raw_laplacian_residual(v, dom.h) <= HARMONIC_RESIDUAL_TOL:
                    break
        else:
            raise NoConvergence("harmonic extension: sweep cap exceeded")
    w0 = u0.values - v
    return u0.with_values(w0, u0.time), GridFunction(dom, v)


def trapezoid_weights(domain: Domain) -> np.ndarray:
    """Composite-trapezoid quadrature weights on the grid."""
    w1 = [np.full(n, domain.h) for n in domain.shape]
    for w in w1:
        w[0] *= 0.5
        w[-1] *= 0.5
    if domain.ndim == 1:
        return w1[0]
    return np.outer(w1[0], w1[1])

