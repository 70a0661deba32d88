"""Forward-equation machinery on a finite interval with reflecting borders.

Densities are cell-averaged on a uniform grid (values are taken at cell
centers, the usual finite-volume conflation).  The stationary density of a
time-homogeneous model with zero-flux boundaries is ``exp(V(x))`` up to
normalization, with the nonequilibrium potential ``V(x) = 2 int_a^x f/g^2``
accumulated by cumulative trapezoid from the left edge (``V(a) = 0``).

Time evolution uses a conservative finite-volume update: the probability
flux ``J = (f + g g') p - d(g^2 p / 2)/dx`` is assembled at cell interfaces
with minmod-limited upwind advection and centered diffusion, and both
boundary-face fluxes are forced to zero, so mass conservation and the
zero-flux condition are structural rather than approximate.  Explicit Euler
stepping with ``dt <= 0.4 dx^2 / max(g^2)`` (the recorded bound).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

__all__ = [
    "GridDensity",
    "FpeProblem",
    "FpeResult",
    "Stability",
    "ExtremumKind",
    "FixedPoint",
    "DensityExtremum",
    "FixedPointReport",
    "stationary_density",
    "nonequilibrium_potential",
    "evolve_fpe",
    "probability_flux",
    "relative_entropy",
    "analyze_fixed_points",
    "compare_modes",
]

_NEG_TOL = -1e-12


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Cell-averaged probability density on [a, b], mass normalized to 1."""

    a: float
    b: float
    values: np.ndarray
    clipped: bool = False

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"empty interval [{self.a}, {self.b}]")
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("need at least 2 cells")
        clipped = self.clipped
        if vals.min() < 0:
            if vals.min() < _NEG_TOL:
                raise ValueError(f"negative cell average {vals.min()} beyond tolerance")
            vals = np.clip(vals, 0.0, None)
            clipped = True
        mass = vals.sum() * (self.b - self.a) / vals.size
        if mass <= 0:
            raise ValueError("density has no mass")
        if abs(mass - 1.0) > 1e-9:
            vals = vals / mass
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "clipped", clipped)

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dx)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray],
                      a: float, b: float, n_cells: int) -> "GridDensity":
        dx = (b - a) / n_cells
        centers = a + (np.arange(n_cells) + 0.5) * dx
        return cls(a, b, np.asarray(fn(centers), dtype=float))

    @classmethod
    def point_mass(cls, a: float, b: float, n_cells: int, x0: float) -> "GridDensity":
        """Single-cell realization of a point mass at ``x0``."""
        if not a <= x0 <= b:
            raise ValueError(f"x0={x0} outside [{a}, {b}]")
        dx = (b - a) / n_cells
        idx = min(int((x0 - a) / dx), n_cells - 1)
        vals = np.zeros(n_cells)
        vals[idx] = 1.0 / dx
        return cls(a, b, vals)

    @classmethod
    def uniform(cls, a: float, b: float, n_cells: int) -> "GridDensity":
        return cls(a, b, np.full(n_cells, 1.0 / (b - a)))

    def l1_distance(self, other: "GridDensity") -> float:
        self._check_same_grid(other)
        return float(np.sum(np.abs(self.values - other.values)) * self.dx)

    def total_variation(self, other: "GridDensity") -> float:
        return 0.5 * self.l1_distance(other)

    def _check_same_grid(self, other: "GridDensity") -> None:
        if (self.a, self.b, self.n_cells) != (other.a, other.b, other.n_cells):
            raise ValueError("densities live on different grids")

    def write_csv(self, fp: TextIO) -> None:
        fp.write("x_center,density\n")
        for x, v in zip(self.centers, self.values):
            fp.write(f"{float(x)!r},{float(v)!r}\n")


def _sample_g_floor(g, a, b, n=512):
    xs = np.linspace(a, b, n)
    gv = np.asarray(g(xs, 0.0), dtype=float)
    worst = int(np.argmin(gv))
    return float(gv[worst]), float(xs[worst])


def nonequilibrium_potential(
    f: Callable, g: Callable, a: float, b: float, xs: np.ndarray,
) -> np.ndarray:
    """Cumulative trapezoid of ``2 f / g^2`` from ``a`` to each of ``xs``.

    ``xs`` must be increasing and start at or after ``a``; the integration
    nodes are ``a`` followed by ``xs``.
    """
    nodes = np.concatenate([[a], xs])
    u = 2.0 * np.asarray(f(nodes, 0.0), dtype=float) / np.asarray(g(nodes, 0.0), dtype=float) ** 2
    widths = np.diff(nodes)
    return np.cumsum(0.5 * (u[:-1] + u[1:]) * widths)


def stationary_density(
    f: Callable, g: Callable, interval: tuple[float, float], n_cells: int,
) -> GridDensity:
    """Zero-flux stationary density ``exp(V)`` normalized on the interval.

    The potential is shifted by its maximum before exponentiation for
    overflow safety.  ``g`` must be bounded away from zero on the interval;
    values at or below 1e-12 anywhere sampled are rejected with the
    location.
    """
    a, b = interval
    if not a < b:
        raise ValueError(f"empty interval [{a}, {b}]")
    if n_cells < 2:
        raise ValueError("need at least 2 cells")
    floor, where = _sample_g_floor(g, a, b, max(512, 2 * n_cells))
    if floor <= 1e-12:
        raise ValueError(f"diffusion coefficient not bounded away from 0: "
                         f"g({where}) = {floor}")
    dx = (b - a) / n_cells
    centers = a + (np.arange(n_cells) + 0.5) * dx
    v = nonequilibrium_potential(f, g, a, b, centers)
    p = np.exp(v - v.max())
    return GridDensity(a, b, p / (p.sum() * dx))


@dataclass(frozen=True)
class FpeProblem:
    """Time-homogeneous forward problem on [a, b] with reflecting borders.

    ``dgdx`` is the optional analytic derivative of ``g``; without it the
    advection velocity uses central differences.  Construction checks (by
    sampling) that ``g`` stays above a positive floor, which is recorded.
    """

    f: Callable
    g: Callable
    interval: tuple[float, float]
    initial: GridDensity
    dgdx: Callable | None = None
    g_floor: float = field(init=False)

    def __post_init__(self) -> None:
        a, b = self.interval
        if (self.initial.a, self.initial.b) != (a, b):
            raise ValueError("initial density must live on the problem interval")
        floor, where = _sample_g_floor(self.g, a, b)
        if floor <= 0:
            raise ValueError(f"g must be positive on [{a}, {b}]; g({where}) = {floor}")
        object.__setattr__(self, "g_floor", floor)

    def stability_bound(self) -> float:
        """Recorded explicit-Euler bound: ``0.4 dx^2 / max(g^2)``."""
        a, b = self.interval
        xs = np.linspace(a, b, 512)
        gmax = float(np.max(np.asarray(self.g(xs, 0.0), dtype=float) ** 2))
        return 0.4 * self.initial.dx**2 / gmax

    def velocity(self, xs: np.ndarray) -> np.ndarray:
        """Advection field ``f + g g'`` of the conservation form."""
        gv = np.asarray(self.g(xs, 0.0), dtype=float)
        if self.dgdx is not None:
            gp = np.asarray(self.dgdx(xs, 0.0), dtype=float)
        else:
            h = 1e-6 * max(1.0, abs(self.interval[1] - self.interval[0]))
            gp = (np.asarray(self.g(xs + h, 0.0), dtype=float)
                  - np.asarray(self.g(xs - h, 0.0), dtype=float)) / (2 * h)
        return np.asarray(self.f(xs, 0.0), dtype=float) + gv * gp


@dataclass(frozen=True)
class FpeResult:
    final: GridDensity
    times: tuple[float, ...]
    snapshots: tuple[GridDensity, ...]
    mass_drift: float


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.where((a > 0) & (b > 0), np.minimum(a, b), 0.0)
    return np.where((a < 0) & (b < 0), np.maximum(a, b), out)


def evolve_fpe(
    problem: FpeProblem,
    dt: float,
    horizon: float,
    snapshot_every: float | None = None,
) -> FpeResult:
    """March the forward equation to ``horizon`` with explicit Euler steps.

    Rejects ``dt`` above the recorded stability bound (the admissible value
    is part of the message).  Mass is conserved to rounding because the
    update telescopes interface fluxes with both boundary faces at zero.
    """
    bound = problem.stability_bound()
    if dt > bound:
        raise ValueError(f"dt={dt} violates the stability bound; admissible dt <= {bound:.3e}")
    if horizon < dt:
        raise ValueError("horizon must cover at least one step")

    a, b = problem.interval
    n = problem.initial.n_cells
    dx = problem.initial.dx
    centers = problem.initial.centers
    interfaces = a + np.arange(1, n) * dx

    g_c = np.asarray(problem.g(centers, 0.0), dtype=float)
    diff_c = 0.5 * g_c**2
    w_i = problem.velocity(interfaces)
    w_plus = w_i > 0

    p = problem.initial.values.copy()
    n_steps = round(horizon / dt)
    snap_stride = max(1, round(snapshot_every / dt)) if snapshot_every else None
    times = [0.0]
    snaps = [GridDensity(a, b, p)]
    mass0 = p.sum() * dx

    slopes = np.empty(n)
    for k in range(n_steps):
        slopes[1:-1] = _minmod(p[1:-1] - p[:-2], p[2:] - p[1:-1])
        slopes[0] = 0.0
        slopes[-1] = 0.0
        up = p[:-1] + 0.5 * slopes[:-1]
        down = p[1:] - 0.5 * slopes[1:]
        adv = w_i * np.where(w_plus, up, down)
        dif = (diff_c[1:] * p[1:] - diff_c[:-1] * p[:-1]) / dx
        j_interior = adv - dif
        # zero-flux boundary faces: only interior fluxes move mass
        p = p - (dt / dx) * (np.concatenate([j_interior, [0.0]])
                             - np.concatenate([[0.0], j_interior]))
        if snap_stride and (k + 1) % snap_stride == 0:
            times.append((k + 1) * dt)
            snaps.append(GridDensity(a, b, p))

    mass_drift = abs(p.sum() * dx - mass0)
    final = GridDensity(a, b, p)
    if not snap_stride:
        times, snaps = [0.0, n_steps * dt], [snaps[0], final]
    elif times[-1] != n_steps * dt:
        times.append(n_steps * dt)
        snaps.append(final)
    return FpeResult(final, tuple(times), tuple(snaps), float(mass_drift))


def probability_flux(p: GridDensity, f: Callable, g: Callable,
                     dgdx: Callable | None = None) -> np.ndarray:
    """Pointwise flux ``(f + g g') p - d(g^2 p)/dx / 2`` at cell centers.

    The derivative is a centered difference in the interior and a
    third-order one-sided stencil at the two edge cells.
    """
    xs = p.centers
    dx = p.dx
    gv = np.asarray(g(xs, 0.0), dtype=float)
    if dgdx is not None:
        gp = np.asarray(dgdx(xs, 0.0), dtype=float)
    else:
        h = 1e-6 * max(1.0, p.b - p.a)
        gp = (np.asarray(g(xs + h, 0.0), dtype=float)
              - np.asarray(g(xs - h, 0.0), dtype=float)) / (2 * h)
    q = gv**2 * p.values
    dq = np.empty_like(q)
    dq[1:-1] = (q[2:] - q[:-2]) / (2 * dx)
    dq[0] = (-11 * q[0] + 18 * q[1] - 9 * q[2] + 2 * q[3]) / (6 * dx)
    dq[-1] = (11 * q[-1] - 18 * q[-2] + 9 * q[-3] - 2 * q[-4]) / (6 * dx)
    return (np.asarray(f(xs, 0.0), dtype=float) + gv * gp) * p.values - 0.5 * dq


def relative_entropy(p: GridDensity, q: GridDensity) -> float:
    """Kullback-Leibler divergence ``sum p log(p/q) dx`` with 0 log 0 = 0.

    Returns ``inf`` when ``q`` vanishes on a cell where ``p`` does not.
    """
    p._check_same_grid(q)
    pv, qv = p.values, q.values
    if np.any((qv == 0) & (pv > 0)):
        return math.inf
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])) * p.dx)


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


class ExtremumKind(enum.Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class FixedPoint:
    x: float
    stability: Stability


@dataclass(frozen=True)
class DensityExtremum:
    x: float
    kind: ExtremumKind


@dataclass(frozen=True)
class FixedPointReport:
    fixed_points: tuple[FixedPoint, ...]
    extrema: tuple[DensityExtremum, ...] = ()
    matches: tuple[tuple[float, float, float], ...] = ()  # (x_fixed, x_mode, |gap|)

    def stable(self) -> list[float]:
        return [fp.x for fp in self.fixed_points if fp.stability is Stability.STABLE]

    def unstable(self) -> list[float]:
        return [fp.x for fp in self.fixed_points if fp.stability is Stability.UNSTABLE]


def analyze_fixed_points(
    f: Callable[[float], float],
    fprime: Callable[[float], float],
    interval: tuple[float, float],
    n_scan: int = 1024,
) -> FixedPointReport:
    """Zeros of ``f`` on the interval, classified by the sign of ``f'``.

    Sign changes found on an ``n_scan``-point scan are bisected to 1e-10;
    ``|f'| < 1e-8`` at a root marks it degenerate (excluded from matching).
    """
    a, b = interval
    xs = np.linspace(a, b, n_scan)
    fv = np.array([float(f(x)) for x in xs])
    roots: list[float] = []
    for i in range(n_scan - 1):
        if fv[i] == 0.0:
            roots.append(float(xs[i]))
            continue
        if fv[i] * fv[i + 1] < 0:
            lo_x, hi_x = float(xs[i]), float(xs[i + 1])
            flo = fv[i]
            while hi_x - lo_x > 1e-10:
                mid = 0.5 * (lo_x + hi_x)
                fm = float(f(mid))
                if fm == 0.0:
                    lo_x = hi_x = mid
                    break
                if flo * fm < 0:
                    hi_x = mid
                else:
                    lo_x, flo = mid, fm
            roots.append(0.5 * (lo_x + hi_x))
    if fv[-1] == 0.0:
        roots.append(float(xs[-1]))

    points = []
    for r in roots:
        slope = float(fprime(r))
        if abs(slope) < 1e-8:
            stab = Stability.DEGENERATE
        elif slope < 0:
            stab = Stability.STABLE
        else:
            stab = Stability.UNSTABLE
        points.append(FixedPoint(r, stab))
    return FixedPointReport(tuple(points))


def compare_modes(report: FixedPointReport, p_s: GridDensity) -> FixedPointReport:
    """Attach density critical points and match them to the fixed points.

    Interior extrema come from discrete sign changes of the cell-value
    differences; each non-degenerate fixed point is matched to the nearest
    extremum of the corresponding kind, recording the distance.
    """
    v = p_s.values
    xs = p_s.centers
    extrema: list[DensityExtremum] = []
    # plateau-aware sign changes of the cell differences: a symmetric grid
    # puts a mode on a two-cell plateau, reported at the plateau center
    sign = np.sign(np.diff(v))
    nz = np.flatnonzero(sign)
    for a, b in zip(nz[:-1], nz[1:]):
        x_mid = float(np.mean(xs[a + 1:b + 1]))
        if sign[a] > 0 and sign[b] < 0:
            extrema.append(DensityExtremum(x_mid, ExtremumKind.MAX))
        elif sign[a] < 0 and sign[b] > 0:
            extrema.append(DensityExtremum(x_mid, ExtremumKind.MIN))

    matches = []
    want = {Stability.STABLE: ExtremumKind.MAX, Stability.UNSTABLE: ExtremumKind.MIN}
    for fp in report.fixed_points:
        if fp.stability is Stability.DEGENERATE:
            continue
        kind = want[fp.stability]
        candidates = [e for e in extrema if e.kind is kind]
        if candidates:
            best = min(candidates, key=lambda e: abs(e.x - fp.x))
            matches.append((fp.x, best.x, abs(best.x - fp.x)))
    return FixedPointReport(report.fixed_points, tuple(extrema), tuple(matches))
