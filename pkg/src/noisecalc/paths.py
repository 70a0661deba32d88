"""Brownian sample paths on explicit time grids.

Grids are explicit point sequences so non-uniform partitions are first-class;
a uniform constructor is provided for convenience.  Every random operation is
a pure function of its inputs and a :class:`SeedSpec`, which makes ensembles
order-independent: path ``i`` always sees the same draws no matter how many
other paths run, or in what order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

__all__ = [
    "SeedSpec",
    "TimeGrid",
    "SamplePath",
    "VectorPath",
    "generate_brownian",
    "generate_brownian_vector",
    "refine_bridge",
]


@dataclass(frozen=True)
class SeedSpec:
    """A 64-bit master seed plus a non-negative stream index.

    The pair ``(master, stream)`` fully determines every draw of any
    operation consuming it.  Streams are mixed into generator state through
    ``numpy.random.SeedSequence([master, stream])``; derived substreams are
    plain integer offsets of ``stream``, so parallel ensembles reproduce
    serial ones draw for draw.

    Gaussian variates come from ``Generator.standard_normal`` (ziggurat).
    Bit-exact reproducibility is promised within one build of this package,
    not across numpy versions.
    """

    master: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.master) < 2**64:
            raise ValueError(f"master seed must be a 64-bit unsigned integer, got {self.master}")
        if int(self.stream) < 0:
            raise ValueError(f"stream index must be non-negative, got {self.stream}")

    def shifted(self, offset: int) -> "SeedSpec":
        """Substream at ``stream + offset``."""
        return SeedSpec(self.master, self.stream + offset)

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.master, self.stream]))


def _frozen_array(values, dtype=np.float64, ndim: int = 1) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing sequence of non-negative times."""

    points: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _frozen_array(self.points))
        pts = self.points
        if pts.size < 1:
            raise ValueError("a time grid needs at least one point")
        if pts[0] < 0:
            raise ValueError(f"first grid point must be >= 0, got {pts[0]}")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, t0: float, t1: float, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {n_steps}")
        if not t1 > t0:
            raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
        return cls(np.linspace(t0, t1, n_steps + 1))

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def diameter(self) -> float:
        """Largest consecutive spacing."""
        if self.n_steps == 0:
            return 0.0
        return float(self.spacings.max())

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or np.array_equal(self.points, other.points)

    def __len__(self) -> int:
        return self.points.size


def _check_same_grid(a, b, what: str = "paths") -> None:
    if not a.grid.same_as(b.grid):
        raise ValueError(f"{what} must share one time grid")


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A time grid plus scalar process values, one per grid point."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.size != len(self.grid):
            raise ValueError(
                f"got {self.values.size} values for {len(self.grid)} grid points"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must all be finite")

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def initial_value(self) -> float:
        return float(self.values[0])

    @property
    def final_value(self) -> float:
        return float(self.values[-1])

    def write_csv(self, fp: TextIO) -> None:
        """Dump as ``t,value`` rows, shortest round-trip decimals."""
        fp.write("t,value\n")
        for t, v in zip(self.grid.points, self.values):
            fp.write(f"{float(t)!r},{float(v)!r}\n")


@dataclass(frozen=True, eq=False)
class VectorPath:
    """A time grid plus m-component vector values, shape (len(grid), m)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=2))
        if self.values.shape[0] != len(self.grid):
            raise ValueError(
                f"got {self.values.shape[0]} rows for {len(self.grid)} grid points"
            )
        if self.values.shape[1] < 1:
            raise ValueError("vector paths need at least one component")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must all be finite")

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def component(self, k: int) -> SamplePath:
        return SamplePath(self.grid, self.values[:, k])

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def write_csv(self, fp: TextIO) -> None:
        m = self.dimension
        fp.write("t," + ",".join(f"x{k + 1}" for k in range(m)) + "\n")
        for t, row in zip(self.grid.points, self.values):
            fp.write(f"{float(t)!r}," + ",".join(f"{float(v)!r}" for v in row) + "\n")


def generate_brownian(grid: TimeGrid, seed: SeedSpec) -> SamplePath:
    """Standard Brownian motion sampled on ``grid``, started at 0.

    Increments over a step of length ``dt`` are independent centered
    Gaussians of variance ``dt``.  Identical ``(grid, seed)`` gives
    bit-identical output.
    """
    rng = seed.generator()
    z = rng.standard_normal(grid.n_steps)
    w = np.empty(len(grid))
    w[0] = 0.0
    np.cumsum(np.sqrt(grid.spacings) * z, out=w[1:])
    return SamplePath(grid, w)


def generate_brownian_vector(grid: TimeGrid, m: int, seed: SeedSpec) -> VectorPath:
    """``m`` independent scalar Brownian paths stacked into a VectorPath.

    Component ``c`` draws from the substream ``(master, stream*m + c)``, so
    ``m = 1`` reproduces :func:`generate_brownian` exactly.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    cols = []
    for c in range(m):
        sub = SeedSpec(seed.master, seed.stream * m + c)
        cols.append(generate_brownian(grid, sub).values)
    return VectorPath(grid, np.column_stack(cols))


def refine_bridge(path: SamplePath, factor: int, seed: SeedSpec) -> SamplePath:
    """Subdivide each grid step into ``factor`` equal substeps.

    Values at the original points are kept; new interior values are drawn
    from the Brownian bridge conditional law between the retained endpoints,
    sampled left to right within each interval (one vectorized normal draw
    per sub-level, in increasing order of the substep index).
    """
    if factor < 2:
        raise ValueError(f"refinement factor must be >= 2, got {factor}")
    t = path.grid.points
    w = path.values
    n = path.grid.n_steps
    if n < 1:
        raise ValueError("cannot refine a single-point path")

    widths = np.diff(t)
    sub = widths / factor
    new_t = np.empty(n * factor + 1)
    new_w = np.empty(n * factor + 1)
    new_t[::factor] = t
    new_w[::factor] = w

    rng = seed.generator()
    t_right = t[1:]
    w_right = w[1:]
    x = w[:-1].copy()          # running bridge state, one slot per interval
    tau = t[:-1].copy()
    for k in range(1, factor):
        tau_next = t[:-1] + k * sub
        remaining = t_right - tau
        mean = x + (w_right - x) * (tau_next - tau) / remaining
        var = (tau_next - tau) * (t_right - tau_next) / remaining
        x = mean + np.sqrt(var) * rng.standard_normal(n)
        new_t[k::factor] = tau_next
        new_w[k::factor] = x
        tau = tau_next

    return SamplePath(TimeGrid(new_t), new_w)
