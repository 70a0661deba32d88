"""Path simulation for SDE models, boundary handling, and exact oracles.

Schemes realize the three evaluation rules one step at a time:

* ``DIRECT_LEFT``: ``x + f dt + g(x) dW`` (requires an Ito-tagged model).
* ``DIRECT_MIDPOINT_HEUN``: predictor ``x^ = x + f dt + g(x) dW`` then
  corrector ``x + f dt + g((x + x^)/2) dW`` (requires Stratonovich).
* ``DIRECT_RIGHT_PREDICTOR_CORRECTOR``: same predictor, corrector evaluates
  ``g`` at the predicted right endpoint (requires Hanggi-Klimontovich).
  An implicit right-point solve is avoided for robustness.
* ``EULER_MARUYAMA_ITO_FORM``: ``DIRECT_LEFT`` on the converted Ito form,
  valid for any interpretation tag.

Domain handling: a state or evaluation point outside the closed domain by
more than 1e-12 is a DomainViolation (stop, or flag-and-clamp under
boundary ``None``); within tolerance it is clamped to the edge, which
distinguishes genuine boundary pathologies from rounding.  Reflection folds
the state back into the interval and logs each fold.

Ensembles are vectorized across paths but every path draws from its own
substream ``(master, stream + i)``, so results are independent of execution
order and of how many other paths run.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .paths import SamplePath, SeedSpec, TimeGrid, generate_brownian, refine_bridge
from .sde import Interpretation, SdeModel, to_ito

__all__ = [
    "SolverScheme",
    "Reflect",
    "STOP_ON_VIOLATION",
    "EventKind",
    "Event",
    "PathResult",
    "HittingStats",
    "McConfig",
    "EnsembleSummary",
    "EnsembleResult",
    "scheme_for",
    "simulate_path",
    "simulate_ensemble",
    "simulate_reflected",
    "hitting_time",
    "exact_ou_path",
    "exact_kinetic_oracle",
    "exact_kinetic_terminal",
    "kinetic_oracle_hitting",
    "besq_time_change",
    "besq_dimension",
    "strong_convergence_order",
]

_DOMAIN_TOL = 1e-12


class SolverScheme(enum.Enum):
    EULER_MARUYAMA_ITO_FORM = "euler_maruyama_ito_form"
    DIRECT_LEFT = "direct_left"
    DIRECT_MIDPOINT_HEUN = "direct_midpoint_heun"
    DIRECT_RIGHT_PREDICTOR_CORRECTOR = "direct_right_predictor_corrector"


_SCHEME_TAG = {
    SolverScheme.DIRECT_LEFT: Interpretation.ITO,
    SolverScheme.DIRECT_MIDPOINT_HEUN: Interpretation.STRATONOVICH,
    SolverScheme.DIRECT_RIGHT_PREDICTOR_CORRECTOR: Interpretation.HAENGGI_KLIMONTOVICH,
}


def scheme_for(interpretation: Interpretation) -> SolverScheme:
    """The direct scheme whose evaluation rule matches an interpretation."""
    return {
        Interpretation.ITO: SolverScheme.DIRECT_LEFT,
        Interpretation.STRATONOVICH: SolverScheme.DIRECT_MIDPOINT_HEUN,
        Interpretation.HAENGGI_KLIMONTOVICH: SolverScheme.DIRECT_RIGHT_PREDICTOR_CORRECTOR,
    }[interpretation]


@dataclass(frozen=True)
class Reflect:
    """Fold the state back into [lo, hi] after each step."""

    lo: float
    hi: float = math.inf

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"empty reflection interval [{self.lo}, {self.hi}]")


STOP_ON_VIOLATION = "stop_on_violation"

Boundary = Reflect | str | None


class EventKind(enum.Enum):
    DOMAIN_VIOLATION = "domain_violation"
    REFLECTION = "reflection"
    HIT_LEVEL = "hit_level"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    value: float


@dataclass(frozen=True)
class PathResult:
    path: SamplePath
    events: tuple[Event, ...]
    terminated_early: bool


@dataclass(frozen=True)
class HittingStats:
    """First-passage statistics over an ensemble.

    A hit is declared when the path enters the band around ``level`` from
    its starting side: ``x <= level + band`` when started above the level,
    ``x >= level - band`` when started below.  Censored paths (no hit by
    the horizon) count in ``n_paths`` but not in the mean.
    """

    level: float
    band: float
    n_paths: int
    n_hit: int
    fraction_hit: float
    mean_hit_time: float | None
    ci95: float | None

    def to_json_dict(self) -> dict:
        return {
            "fraction": self.fraction_hit,
            "mean_time": self.mean_hit_time,
            "ci95": self.ci95,
        }


@dataclass(frozen=True)
class McConfig:
    """Ensemble run configuration.

    ``record`` chooses what each path keeps: ``"path"`` stores values every
    ``record_stride`` steps, ``"terminal"`` keeps only endpoints (use this
    for large ensembles).
    """

    n_paths: int
    dt: float
    horizon: float
    seed: SeedSpec
    boundary: Boundary = None
    record: str = "path"
    record_stride: int = 1

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least one step")
        if self.record not in ("path", "terminal"):
            raise ValueError(f"unknown record mode {self.record!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if isinstance(self.boundary, str) and self.boundary != STOP_ON_VIOLATION:
            raise ValueError(f"unknown boundary mode {self.boundary!r}")

    @property
    def n_steps(self) -> int:
        return max(1, round(self.horizon / self.dt))

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class EnsembleSummary:
    n_paths: int
    dt: float
    horizon: float
    scheme: SolverScheme
    interpretation: Interpretation
    terminal_mean: float
    terminal_var: float
    n_completed: int
    violations: int
    reflections: int
    histogram: tuple[np.ndarray, np.ndarray]  # (bin_edges, densities)
    hitting: HittingStats | None = None

    def to_json_dict(self) -> dict:
        out = {
            "n_paths": self.n_paths,
            "dt": self.dt,
            "horizon": self.horizon,
            "scheme": self.scheme.value,
            "interpretation": self.interpretation.value,
            "terminal_mean": self.terminal_mean,
            "terminal_var": self.terminal_var,
            "events": {"violations": self.violations, "reflections": self.reflections},
        }
        if self.hitting is not None:
            out["hitting"] = self.hitting.to_json_dict()
        return out


@dataclass(frozen=True)
class EnsembleResult:
    results: tuple[PathResult, ...] | None
    summary: EnsembleSummary
    terminals: np.ndarray | None = None  # completed paths only, in path order


def _effective(model: SdeModel, scheme: SolverScheme):
    """Coefficients and evaluation kind actually stepped by a scheme."""
    if scheme is SolverScheme.EULER_MARUYAMA_ITO_FORM:
        ito = to_ito(model)
        return ito.f, ito.g, "left"
    need = _SCHEME_TAG[scheme]
    if model.interpretation is not need:
        raise ValueError(
            f"{scheme.value} requires a {need.value}-tagged model, "
            f"got {model.interpretation.value}"
        )
    kind = {
        SolverScheme.DIRECT_LEFT: "left",
        SolverScheme.DIRECT_MIDPOINT_HEUN: "midpoint",
        SolverScheme.DIRECT_RIGHT_PREDICTOR_CORRECTOR: "right",
    }[scheme]
    return model.f, model.g, kind


def _fold_into(v: np.ndarray, lo: float, hi: float):
    """Reflected positions and fold counts for values outside [lo, hi]."""
    if math.isinf(hi) and math.isinf(lo):
        return v, np.zeros(v.size, dtype=np.int64)
    if math.isinf(hi):
        folds = (v < lo).astype(np.int64)
        return np.where(v < lo, 2 * lo - v, v), folds
    if math.isinf(lo):
        folds = (v > hi).astype(np.int64)
        return np.where(v > hi, 2 * hi - v, v), folds
    length = hi - lo
    q = np.floor((v - lo) / length)
    r = (v - lo) - q * length
    pos = np.where((q % 2) == 0, lo + r, hi - r)
    return pos, np.abs(q).astype(np.int64)


class _Raw:
    """Plain container for engine output, one slot per path."""

    def __init__(self, n: int, x0: float, n_steps: int):
        self.terminal = np.full(n, x0)
        self.completed = np.ones(n, dtype=bool)
        self.final_step = np.full(n, n_steps, dtype=np.int64)
        self.violations = np.zeros(n, dtype=np.int64)
        self.reflections = np.zeros(n, dtype=np.int64)
        self.moved = np.zeros(n, dtype=bool)
        self.hit_time = np.full(n, np.nan)
        self.recorded: np.ndarray | None = None
        self.recorded_steps: np.ndarray | None = None
        self.events: list[list[Event]] | None = None


def _run_engine(
    model: SdeModel,
    scheme: SolverScheme,
    times: np.ndarray,
    n_paths: int,
    seed: SeedSpec,
    boundary: Boundary,
    *,
    record: str = "terminal",
    record_stride: int = 1,
    log_events: bool = False,
    hit_level: float | None = None,
    hit_band: float = 0.0,
    freeze_on_hit: bool = False,
    chunk: int = 512,
) -> _Raw:
    f, g, kind = _effective(model, scheme)
    lo, hi = model.domain
    if isinstance(boundary, Reflect):
        if boundary.lo < lo - _DOMAIN_TOL or boundary.hi > hi + _DOMAIN_TOL:
            raise ValueError("reflection interval must lie inside the model domain")

    n_steps = times.size - 1
    dts = np.diff(times)
    sqdt = np.sqrt(dts)
    x0 = float(model.x0)
    raw = _Raw(n_paths, x0, n_steps)
    if log_events:
        raw.events = [[] for _ in range(n_paths)]

    rec_lookup: dict[int, int] = {}
    if record == "path":
        rec_steps = list(range(0, n_steps + 1, record_stride))
        if rec_steps[-1] != n_steps:
            rec_steps.append(n_steps)
        raw.recorded_steps = np.asarray(rec_steps, dtype=np.int64)
        raw.recorded = np.empty((len(rec_steps), n_paths))
        raw.recorded[0] = x0
        rec_lookup = {s: r for r, s in enumerate(rec_steps) if s > 0}

    x = np.full(n_paths, x0)
    running = np.ones(n_paths, dtype=bool)

    hit_down = True
    if hit_level is not None:
        hit_down = x0 >= hit_level
        in_band = x0 <= hit_level + hit_band if hit_down else x0 >= hit_level - hit_band
        if in_band:
            raw.hit_time[:] = times[0]
            raw.final_step[:] = 0
            if freeze_on_hit:
                running[:] = False

    gens = [seed.shifted(i).generator() for i in range(n_paths)]

    def _log(i: int, kind_: EventKind, t: float, v: float) -> None:
        if raw.events is not None:
            raw.events[i].append(Event(kind_, t, v))

    def _project(values, ids, t_now):
        """Boundary policy for a batch; returns safe values + fatal mask."""
        fatal = np.zeros(values.size, dtype=bool)
        if isinstance(boundary, Reflect):
            folded, folds = _fold_into(values, boundary.lo, boundary.hi)
            hits = np.flatnonzero(folds > 0)
            if hits.size:
                raw.reflections[ids[hits]] += folds[hits]
                for j in hits:
                    _log(ids[j], EventKind.REFLECTION, t_now, float(folded[j]))
            return np.clip(folded, lo, hi), fatal
        beyond = (values < lo - _DOMAIN_TOL) | (values > hi + _DOMAIN_TOL)
        bad = np.flatnonzero(beyond)
        if bad.size:
            raw.violations[ids[bad]] += 1
            for j in bad:
                _log(ids[j], EventKind.DOMAIN_VIOLATION, t_now, float(values[j]))
            if boundary == STOP_ON_VIOLATION:
                fatal = beyond
        return np.clip(values, lo, hi), fatal

    step = 0
    while step < n_steps:
        act_idx = np.flatnonzero(running)
        if act_idx.size == 0:
            break
        width = min(chunk, n_steps - step)
        z = np.empty((act_idx.size, width))
        for row, i in enumerate(act_idx):
            z[row] = gens[i].standard_normal(width)
        alive = np.ones(act_idx.size, dtype=bool)

        for c in range(width):
            rows = np.flatnonzero(alive)
            if rows.size == 0:
                break
            k = step + c
            t_now, t_next, dt = times[k], times[k + 1], dts[k]
            ids = act_idx[rows]
            dw = sqdt[k] * z[rows, c]
            xa = x[ids]
            drift = np.asarray(f(xa, t_now), dtype=float)
            g_left = np.asarray(g(xa, t_now), dtype=float)

            if kind == "left":
                prop = xa + drift * dt + g_left * dw
            else:
                pred = xa + drift * dt + g_left * dw
                if kind == "midpoint":
                    point = 0.5 * (xa + pred)
                    t_eval = t_now + 0.5 * dt
                else:
                    point = pred
                    t_eval = t_next
                point_safe, fatal = _project(point, ids, t_next)
                if fatal.any():
                    sel = np.flatnonzero(fatal)
                    dead = ids[sel]
                    raw.completed[dead] = False
                    raw.final_step[dead] = k
                    raw.terminal[dead] = x[dead]
                    if hit_level is not None:
                        _mark_crossing_hits(raw, dead, point[sel], t_next,
                                            hit_level, hit_band, hit_down)
                    alive[rows[sel]] = False
                    keep = ~fatal
                    rows, ids = rows[keep], ids[keep]
                    xa, drift, dw = xa[keep], drift[keep], dw[keep]
                    point_safe = point_safe[keep]
                    if ids.size == 0:
                        continue
                g_eval = np.asarray(g(point_safe, t_eval), dtype=float)
                prop = xa + drift * dt + g_eval * dw

            prop_safe, fatal = _project(prop, ids, t_next)
            if fatal.any():
                sel = np.flatnonzero(fatal)
                dead = ids[sel]
                # the offending value is stored, then the path terminates
                x[dead] = prop[sel]
                raw.completed[dead] = False
                raw.final_step[dead] = k + 1
                raw.terminal[dead] = prop[sel]
                raw.moved[dead] |= prop[sel] != x0
                if hit_level is not None:
                    _mark_crossing_hits(raw, dead, prop[sel], t_next,
                                        hit_level, hit_band, hit_down)
                alive[rows[sel]] = False
                keep = ~fatal
                rows, ids = rows[keep], ids[keep]
                prop_safe = prop_safe[keep]

            if ids.size:
                x[ids] = prop_safe
                raw.moved[ids] |= prop_safe != x0

                if hit_level is not None:
                    fresh = np.isnan(raw.hit_time[ids])
                    entered = (prop_safe <= hit_level + hit_band) if hit_down \
                        else (prop_safe >= hit_level - hit_band)
                    new = np.flatnonzero(fresh & entered)
                    if new.size:
                        just_hit = ids[new]
                        raw.hit_time[just_hit] = t_next
                        for j, i in enumerate(just_hit):
                            _log(i, EventKind.HIT_LEVEL, t_next, float(prop_safe[new][j]))
                        if freeze_on_hit:
                            raw.terminal[just_hit] = prop_safe[new]
                            raw.final_step[just_hit] = k + 1
                            alive[rows[new]] = False

            if raw.recorded is not None and (k + 1) in rec_lookup:
                raw.recorded[rec_lookup[k + 1]] = x

        running[act_idx] = alive
        step += width

    finished = raw.completed & (raw.final_step == n_steps)
    raw.terminal[finished] = x[finished]
    return raw


def _mark_crossing_hits(raw, ids, values, t, level, band, hit_down):
    """Count a fatal violation as a hit when its value crossed the band."""
    cond = (values <= level + band) if hit_down else (values >= level - band)
    sel = cond & np.isnan(raw.hit_time[ids])
    raw.hit_time[ids[sel]] = t


def _path_result(raw: _Raw, times: np.ndarray, i: int) -> PathResult:
    last = int(raw.final_step[i])
    steps = raw.recorded_steps
    keep = steps <= last
    t = times[steps[keep]]
    values = raw.recorded[keep, i].copy()
    events = tuple(raw.events[i]) if raw.events is not None else ()
    return PathResult(
        path=SamplePath(TimeGrid(t), values),
        events=events,
        terminated_early=not bool(raw.completed[i]),
    )


def simulate_path(
    model: SdeModel,
    scheme: SolverScheme,
    grid: TimeGrid,
    seed: SeedSpec,
    boundary: Boundary = None,
) -> PathResult:
    """Simulate one path of ``model`` under ``scheme`` on ``grid``."""
    raw = _run_engine(
        model, scheme, grid.points, 1, seed, boundary,
        record="path", record_stride=1, log_events=True,
    )
    return _path_result(raw, grid.points, 0)


def _summarize(model, scheme, cfg, raw, hitting=None) -> EnsembleSummary:
    terminal = raw.terminal[raw.completed]
    if terminal.size:
        mean = float(terminal.mean())
        var = float(terminal.var(ddof=1)) if terminal.size > 1 else 0.0
        bins = min(50, max(5, terminal.size // 20 + 5))
        hist, edges = np.histogram(terminal, bins=bins, density=True)
    else:
        mean, var = math.nan, math.nan
        hist, edges = np.array([]), np.array([])
    return EnsembleSummary(
        n_paths=cfg.n_paths,
        dt=cfg.dt,
        horizon=cfg.horizon,
        scheme=scheme,
        interpretation=model.interpretation,
        terminal_mean=mean,
        terminal_var=var,
        n_completed=int(raw.completed.sum()),
        violations=int(raw.violations.sum()),
        reflections=int(raw.reflections.sum()),
        histogram=(edges, hist),
        hitting=hitting,
    )


def simulate_ensemble(model: SdeModel, scheme: SolverScheme, cfg: McConfig) -> EnsembleResult:
    """Independent paths on substreams ``(master, stream + i)``.

    Per-path errors become events, never abort the ensemble; the summary is
    a pure function of ``(model, scheme, cfg)`` regardless of execution
    interleaving.
    """
    times = cfg.times()
    raw = _run_engine(
        model, scheme, times, cfg.n_paths, cfg.seed, cfg.boundary,
        record=cfg.record, record_stride=cfg.record_stride,
        log_events=cfg.record == "path",
    )
    results = None
    if cfg.record == "path":
        results = tuple(_path_result(raw, times, i) for i in range(cfg.n_paths))
    return EnsembleResult(results, _summarize(model, scheme, cfg, raw),
                          raw.terminal[raw.completed].copy())


def simulate_reflected(
    model: SdeModel,
    scheme: SolverScheme,
    interval: tuple[float, float],
    cfg: McConfig,
) -> PathResult:
    """One path folded into ``interval`` after each step."""
    a, b = interval
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if not (a <= model.x0 <= b):
        raise ValueError(f"x0={model.x0} outside [{a}, {b}]")
    times = cfg.times()
    raw = _run_engine(
        model, scheme, times, 1, cfg.seed, Reflect(a, b),
        record="path", record_stride=cfg.record_stride, log_events=True,
    )
    return _path_result(raw, times, 0)


def hitting_time(
    model: SdeModel,
    scheme: SolverScheme,
    level: float,
    band: float,
    cfg: McConfig,
) -> HittingStats:
    """First-passage statistics of the band around ``level``.

    Paths freeze at their first hit (their noise stream stops there); a
    fatal domain violation whose value crossed the band also counts as a
    hit at that time.
    """
    if band <= 0:
        raise ValueError("band must be positive")
    times = cfg.times()
    raw = _run_engine(
        model, scheme, times, cfg.n_paths, cfg.seed, cfg.boundary,
        record="terminal", hit_level=level, hit_band=band, freeze_on_hit=True,
    )
    return _hitting_stats(level, band, cfg.n_paths, raw.hit_time)


def _hitting_stats(level, band, n_paths, hit_time) -> HittingStats:
    hits = hit_time[~np.isnan(hit_time)]
    n_hit = int(hits.size)
    if n_hit:
        mean = float(hits.mean())
        sd = float(hits.std(ddof=1)) if n_hit > 1 else 0.0
        ci = 1.96 * sd / math.sqrt(n_hit)
    else:
        mean, ci = None, None
    return HittingStats(
        level=level, band=band, n_paths=n_paths, n_hit=n_hit,
        fraction_hit=n_hit / n_paths, mean_hit_time=mean, ci95=ci,
    )


# --- exact oracles ----------------------------------------------------------


def _ou_coefficients(m: float, gamma: float, sigma: float, h):
    """Exact transition: mean decay factor and noise scale over a step."""
    decay = np.exp(-gamma * np.asarray(h, dtype=float) / m)
    scale = np.sqrt(sigma**2 / (2 * gamma * m) * (1.0 - decay**2))
    return decay, scale


def _check_langevin(m, gamma, sigma):
    if min(m, gamma, sigma) <= 0:
        raise ValueError("m, gamma, sigma must all be positive")


def exact_ou_path(
    m: float, gamma: float, sigma: float, v0: float,
    grid: TimeGrid, seed: SeedSpec,
) -> SamplePath:
    """Velocity path with exact Gaussian transitions at the grid times.

    ``V_{t+h} | V_t`` is normal with mean ``V_t exp(-gamma h / m)`` and
    variance ``sigma^2 / (2 gamma m) * (1 - exp(-2 gamma h / m))``, so the
    sampled skeleton is exact in distribution for any spacing.
    """
    _check_langevin(m, gamma, sigma)
    decay, scale = _ou_coefficients(m, gamma, sigma, grid.spacings)
    z = seed.generator().standard_normal(grid.n_steps)
    v = np.empty(len(grid))
    v[0] = v0
    cur = float(v0)
    for k in range(grid.n_steps):
        cur = cur * decay[k] + scale[k] * z[k]
        v[k + 1] = cur
    return SamplePath(grid, v)


def exact_kinetic_oracle(
    delta: int, m: float, gamma: float, sigma: float,
    v0s: Sequence[float], grid: TimeGrid, seed: SeedSpec,
) -> SamplePath:
    """Kinetic energy of ``delta`` independent Langevin particles.

    Built from exact velocity transitions (substream ``stream*delta + c``
    for component ``c``), hence exact in distribution at the grid times;
    this is the independent oracle for the kinetic-energy claims.
    """
    if delta not in (1, 2):
        raise ValueError("delta must be 1 or 2")
    if len(v0s) != delta:
        raise ValueError(f"need {delta} initial velocities, got {len(v0s)}")
    total = np.zeros(len(grid))
    for c in range(delta):
        sub = SeedSpec(seed.master, seed.stream * delta + c)
        v = exact_ou_path(m, gamma, sigma, v0s[c], grid, sub).values
        total += v * v
    return SamplePath(grid, 0.5 * m * total)


def exact_kinetic_terminal(
    delta: int, m: float, gamma: float, sigma: float,
    v0s: Sequence[float], horizon: float, n_paths: int, seed: SeedSpec,
) -> np.ndarray:
    """Terminal kinetic-energy sample, one exact transition per particle."""
    if delta not in (1, 2) or len(v0s) != delta:
        raise ValueError("delta must be 1 or 2 and match len(v0s)")
    _check_langevin(m, gamma, sigma)
    decay, scale = _ou_coefficients(m, gamma, sigma, horizon)
    out = np.zeros(n_paths)
    for i in range(n_paths):
        total = 0.0
        for c in range(delta):
            gen = SeedSpec(seed.master, (seed.stream + i) * delta + c).generator()
            v = v0s[c] * decay + scale * gen.standard_normal()
            total += v * v
        out[i] = 0.5 * m * total
    return out


def kinetic_oracle_hitting(
    delta: int, m: float, gamma: float, sigma: float,
    v0s: Sequence[float], level: float, band: float, cfg: McConfig,
    chunk: int = 512,
) -> HittingStats:
    """Ensemble first-passage statistics of the exact kinetic oracle.

    Vectorized across paths; path ``i`` component ``c`` draws from the
    substream ``(stream + i) * delta + c``, matching
    :func:`exact_kinetic_oracle` path by path.  Paths freeze at their
    first entry into the band.
    """
    if delta not in (1, 2) or len(v0s) != delta:
        raise ValueError("delta must be 1 or 2 and match len(v0s)")
    _check_langevin(m, gamma, sigma)
    if band <= 0:
        raise ValueError("band must be positive")
    n = cfg.n_paths
    n_steps = cfg.n_steps
    decay, scale = _ou_coefficients(m, gamma, sigma, cfg.dt)

    gens = [
        [SeedSpec(cfg.seed.master, (cfg.seed.stream + i) * delta + c).generator()
         for c in range(delta)]
        for i in range(n)
    ]
    v = np.tile(np.asarray(v0s, dtype=float), (n, 1))
    hit_time = np.full(n, np.nan)
    k0 = 0.5 * m * float(np.sum(np.square(v0s)))
    if k0 <= level + band:
        hit_time[:] = 0.0
        return _hitting_stats(level, band, n, hit_time)

    active = np.arange(n)
    step = 0
    while step < n_steps and active.size:
        width = min(chunk, n_steps - step)
        z = np.empty((active.size, delta, width))
        for row, i in enumerate(active):
            for c in range(delta):
                z[row, c] = gens[i][c].standard_normal(width)
        va = v[active]
        alive = np.ones(active.size, dtype=bool)
        for c_step in range(width):
            rows = np.flatnonzero(alive)
            if rows.size == 0:
                break
            va[rows] = va[rows] * decay + scale * z[rows, :, c_step]
            k_now = 0.5 * m * np.sum(va[rows] ** 2, axis=1)
            hit = np.flatnonzero(k_now <= level + band)
            if hit.size:
                hit_time[active[rows[hit]]] = (step + c_step + 1) * cfg.dt
                alive[rows[hit]] = False
        v[active] = va
        active = active[alive]
        step += width

    return _hitting_stats(level, band, n, hit_time)


def besq_time_change(t: float, m: float, gamma: float, sigma: float) -> float:
    """Clock mapping the kinetic SDE onto a squared Bessel process:
    ``s(t) = sigma^2 / (4 gamma) * (exp(2 gamma t / m) - 1)``."""
    _check_langevin(m, gamma, sigma)
    return sigma**2 / (4 * gamma) * math.expm1(2 * gamma * t / m)


def besq_dimension(model_kind: str) -> int:
    """Squared-Bessel dimension of a kinetic-energy family."""
    kinds = {"single": 1, "langevin1": 1, "two_particle": 2, "langevin2": 2}
    try:
        return kinds[model_kind]
    except KeyError:
        raise ValueError(f"unknown model kind {model_kind!r}") from None


# --- strong convergence -------------------------------------------------------


def _plain_terminal(f, g, kind, x0, times, dw):
    """Vectorized stepping without boundary handling; returns terminals.

    ``dw`` has shape (n_paths, n_steps); meant for globally smooth models.
    """
    x = np.full(dw.shape[0], float(x0))
    dts = np.diff(times)
    for k in range(dw.shape[1]):
        t_now, dt = times[k], dts[k]
        drift = np.asarray(f(x, t_now), dtype=float)
        gl = np.asarray(g(x, t_now), dtype=float)
        if kind == "left":
            x = x + drift * dt + gl * dw[:, k]
        else:
            pred = x + drift * dt + gl * dw[:, k]
            point = pred if kind == "right" else 0.5 * (x + pred)
            te = times[k + 1] if kind == "right" else t_now + 0.5 * dt
            x = x + drift * dt + np.asarray(g(point, te), dtype=float) * dw[:, k]
    return x


def strong_convergence_order(
    model: SdeModel,
    scheme: SolverScheme,
    dts: Sequence[float],
    cfg: McConfig,
    reference: str | Callable[[SamplePath], float] = "finest",
    ref_factor: int = 16,
) -> float:
    """Least-squares slope of log strong error at the horizon vs log dt.

    ``dts`` must be strictly decreasing with dyadic ratios.  The driving
    noise is shared across resolutions by bridge refinement of one coarse
    path per ensemble member; the reference is either the same scheme on a
    ``ref_factor`` times finer grid, or a caller-supplied oracle mapping
    the finest driver path to an exact terminal value.
    """
    dts = list(dts)
    if len(dts) < 3:
        raise ValueError("need at least 3 dt levels")
    for a, b in zip(dts, dts[1:]):
        if not b < a:
            raise ValueError("dts must be strictly decreasing")
        ratio = a / b
        r = round(ratio)
        if abs(ratio - r) > 1e-9 or r < 2 or (r & (r - 1)):
            raise ValueError("dts must refine dyadically")
    if ref_factor < 2 or ref_factor & (ref_factor - 1):
        raise ValueError("ref_factor must be a power of two >= 2")

    T = cfg.horizon
    n_levels = [round(T / dt) for dt in dts]
    if abs(T / n_levels[0] - dts[0]) > 1e-12 * max(1.0, T):
        raise ValueError("horizon must be an integer multiple of the coarsest dt")
    n_ref = n_levels[-1] * ref_factor

    f, g, kind = _effective(model, scheme)
    n_paths = cfg.n_paths

    ladders: dict[int, list[np.ndarray]] = {n: [] for n in n_levels + [n_ref]}
    grid0 = TimeGrid.uniform(0.0, T, n_levels[0])
    times_of = {n: np.arange(n + 1) * (T / n) for n in set(n_levels + [n_ref])}
    for p in range(n_paths):
        w = generate_brownian(grid0, cfg.seed.shifted(p))
        n = n_levels[0]
        level = 0
        while True:
            if n in ladders:
                ladders[n].append(np.diff(w.values))
            if n >= n_ref:
                break
            level += 1
            w = refine_bridge(w, 2, cfg.seed.shifted(n_paths + p * 64 + level))
            n *= 2

    ref_incs = np.vstack(ladders[n_ref])
    if reference == "finest":
        x_ref = _plain_terminal(f, g, kind, model.x0, times_of[n_ref], ref_incs)
    else:
        grid_ref = TimeGrid(times_of[n_ref])
        x_ref = np.array([
            reference(SamplePath(grid_ref, np.concatenate([[0.0], np.cumsum(inc)])))
            for inc in ref_incs
        ])

    errs = []
    for n in n_levels:
        incs = np.vstack(ladders[n])
        x_end = _plain_terminal(f, g, kind, model.x0, times_of[n], incs)
        errs.append(float(np.mean(np.abs(x_end - x_ref))))
    if any(e <= 0 for e in errs):
        raise ValueError("zero strong error: a level coincides with the reference")
    slope = np.polyfit(np.log(np.asarray(dts)), np.log(np.asarray(errs)), 1)[0]
    return float(slope)
