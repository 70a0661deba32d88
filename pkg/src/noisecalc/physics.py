"""Prebuilt model families whose boundary behavior separates the three
noise interpretations, plus the rest-start diagnostics that exhibit it.

Each factory returns the matched triple of models for the same physical
quantity.  The kinetic-energy families share the diffusion
``g(K) = sqrt(2 sigma^2 K / m)`` on (0, inf); the relativistic energy lives
on (M, inf) in natural units (c = 1) with user-supplied friction and noise
amplitudes as functions of the energy (defaults: constant 1).

At the boundary the drift triples are the whole story: started from rest,
the Ito member is pushed inward (the boundary reflects instantaneously),
the Stratonovich member admits the frozen solution, and the
Hanggi-Klimontovich member either points out of the domain (single
particle, relativistic) or is absorbed (two particles).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .paths import SamplePath, SeedSpec, TimeGrid, _check_same_grid, generate_brownian_vector
from .sde import Interpretation, SdeModel
from .solvers import (
    Boundary,
    HittingStats,
    McConfig,
    Reflect,
    STOP_ON_VIOLATION,
    SolverScheme,
    _run_engine,
    hitting_time,
    scheme_for,
)

__all__ = [
    "LangevinParams",
    "RelativisticParams",
    "InterpretationTriple",
    "MemberDiagnostics",
    "RestStartReport",
    "kinetic_models",
    "two_particle_models",
    "relativistic_models",
    "langevin_velocity_pair",
    "levy_composite_brownian",
    "rest_start_diagnostics",
    "FAMILIES",
]

FAMILIES = ("langevin1", "langevin2", "relativistic")


@dataclass(frozen=True)
class LangevinParams:
    """Mass, friction, and thermal noise amplitude of a Langevin particle.

    ``u0`` is the second particle's initial velocity, used only by the
    two-particle family.
    """

    m: float = 1.0
    gamma: float = 1.0
    sigma: float = 1.0
    v0: float = 1.0
    u0: float | None = None

    def __post_init__(self) -> None:
        if min(self.m, self.gamma, self.sigma) <= 0:
            raise ValueError("m, gamma, sigma must all be positive")


@dataclass(frozen=True)
class RelativisticParams:
    """Rest mass plus energy-dependent friction and noise amplitudes.

    ``alpha_hat`` and ``d_hat`` are functions of the energy, positive on
    [M, inf); ``d_hat_prime`` is the optional analytic derivative of
    ``d_hat`` (finite differences otherwise).  Natural units, c = 1.
    """

    M: float = 1.0
    alpha_hat: Callable[[np.ndarray], np.ndarray] | None = None
    d_hat: Callable[[np.ndarray], np.ndarray] | None = None
    d_hat_prime: Callable[[np.ndarray], np.ndarray] | None = None
    p0: float = 0.0

    def __post_init__(self) -> None:
        if self.M <= 0:
            raise ValueError("rest mass must be positive")
        if self.alpha_hat is None:
            object.__setattr__(self, "alpha_hat", lambda e: np.ones_like(np.asarray(e, dtype=float)))
        if self.d_hat is None:
            object.__setattr__(self, "d_hat", lambda e: np.ones_like(np.asarray(e, dtype=float)))
            if self.d_hat_prime is None:
                object.__setattr__(self, "d_hat_prime", lambda e: np.zeros_like(np.asarray(e, dtype=float)))

    @property
    def e0(self) -> float:
        """Initial energy ``sqrt(M^2 + p0^2)``."""
        return math.hypot(self.M, self.p0)

    def d_prime(self, e):
        if self.d_hat_prime is not None:
            return self.d_hat_prime(e)
        # one-sided stencil where the two-sided one would dip below M
        e = np.asarray(e, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(e))
        lo = np.maximum(e - h, self.M)
        return (np.asarray(self.d_hat(e + h), dtype=float)
                - np.asarray(self.d_hat(lo), dtype=float)) / (e + h - lo)


@dataclass(frozen=True)
class InterpretationTriple:
    """The same dynamics written under the three interpretations."""

    ito: SdeModel
    stratonovich: SdeModel
    hk: SdeModel

    def members(self) -> list[SdeModel]:
        return [self.ito, self.stratonovich, self.hk]

    def member(self, interpretation: Interpretation) -> SdeModel:
        return {
            Interpretation.ITO: self.ito,
            Interpretation.STRATONOVICH: self.stratonovich,
            Interpretation.HAENGGI_KLIMONTOVICH: self.hk,
        }[interpretation]


def _kinetic_g(params: LangevinParams):
    c = 2.0 * params.sigma**2 / params.m

    def g(x, t):
        return np.sqrt(c * x)

    def dgdx(x, t):
        # g g' = sigma^2/m identically; g' alone diverges at the origin
        return 0.5 * c / np.sqrt(c * x)

    return g, dgdx


def kinetic_models(params: LangevinParams) -> InterpretationTriple:
    """Kinetic energy of one Langevin particle, ``K = m v^2 / 2``.

    Drifts: ``sigma^2/(2m) - 2 gamma K / m`` (Ito), ``-2 gamma K / m``
    (Stratonovich), ``-sigma^2/(2m) - 2 gamma K / m`` (HK); all share
    ``g = sqrt(2 sigma^2 K / m)`` on (0, inf).
    """
    m, gamma, sigma = params.m, params.gamma, params.sigma
    g, dgdx = _kinetic_g(params)
    x0 = 0.5 * m * params.v0**2
    relax = 2.0 * gamma / m
    inject = sigma**2 / (2.0 * m)

    def common(f, tag, label):
        return SdeModel(f=f, g=g, dgdx=dgdx, interpretation=tag, x0=x0,
                        domain=(0.0, math.inf), label=label,
                        assumptions="sqrt diffusion: Lipschitz fails at the origin")

    return InterpretationTriple(
        ito=common(lambda x, t: inject - relax * x, Interpretation.ITO, "kinetic-ito"),
        stratonovich=common(lambda x, t: -relax * x, Interpretation.STRATONOVICH,
                            "kinetic-strat"),
        hk=common(lambda x, t: -inject - relax * x,
                  Interpretation.HAENGGI_KLIMONTOVICH, "kinetic-hk"),
    )


def two_particle_models(params: LangevinParams) -> InterpretationTriple:
    """Total kinetic energy of two independent Langevin particles.

    Drifts: ``sigma^2/m - 2 gamma K / m`` (Ito), ``sigma^2/(2m) - ...``
    (Stratonovich), ``-2 gamma K / m`` (HK).  The HK drift and the
    diffusion both vanish at zero: an absorbing state.
    """
    if params.u0 is None:
        raise ValueError("two-particle family needs u0")
    m, gamma, sigma = params.m, params.gamma, params.sigma
    g, dgdx = _kinetic_g(params)
    x0 = 0.5 * m * (params.u0**2 + params.v0**2)
    relax = 2.0 * gamma / m
    inject = sigma**2 / m

    def common(f, tag, label):
        return SdeModel(f=f, g=g, dgdx=dgdx, interpretation=tag, x0=x0,
                        domain=(0.0, math.inf), label=label,
                        assumptions="sqrt diffusion: Lipschitz fails at the origin")

    return InterpretationTriple(
        ito=common(lambda x, t: inject - relax * x, Interpretation.ITO, "kinetic2-ito"),
        stratonovich=common(lambda x, t: 0.5 * inject - relax * x,
                            Interpretation.STRATONOVICH, "kinetic2-strat"),
        hk=common(lambda x, t: -relax * x, Interpretation.HAENGGI_KLIMONTOVICH,
                  "kinetic2-hk"),
    )


def relativistic_models(params: RelativisticParams) -> InterpretationTriple:
    """Relativistic energy of a randomly dispersed particle on (M, inf).

    The three drift displays are implemented as given (they agree under
    conversion when the noise amplitude is constant); the shared diffusion
    is ``sqrt(2 D(E) (1 - (M/E)^2))``, vanishing at the rest energy.
    """
    M = params.M
    alpha, d_hat = params.alpha_hat, params.d_hat

    def bracket(e):
        e = np.asarray(e, dtype=float)
        return 1.0 - (M / e) ** 2

    def g(x, t):
        return np.sqrt(2.0 * np.asarray(d_hat(x), dtype=float) * bracket(x))

    def dgdx(x, t):
        # (g^2)' / (2 g); diverges at the rest energy where g vanishes, so
        # conversions are meaningful on the open domain only
        x = np.asarray(x, dtype=float)
        dsq = (np.asarray(params.d_prime(x), dtype=float) * bracket(x)
               + 2.0 * np.asarray(d_hat(x), dtype=float) * M**2 / x**3)
        return dsq / g(x, t)

    def f_ito(x, t):
        x = np.asarray(x, dtype=float)
        return (-np.asarray(alpha(x), dtype=float) * x * bracket(x)
                + np.asarray(d_hat(x), dtype=float) / x * (M / x) ** 2)

    def f_strat(x, t):
        x = np.asarray(x, dtype=float)
        return (0.5 * np.asarray(params.d_prime(x), dtype=float)
                - np.asarray(alpha(x), dtype=float) * x) * bracket(x)

    def f_hk(x, t):
        x = np.asarray(x, dtype=float)
        return ((np.asarray(params.d_prime(x), dtype=float)
                 - np.asarray(alpha(x), dtype=float) * x) * bracket(x)
                - np.asarray(d_hat(x), dtype=float) / x * (M / x) ** 2)

    x0 = params.e0
    kwargs = dict(g=g, dgdx=dgdx, x0=x0, domain=(M, math.inf),
                  assumptions="diffusion vanishes at the rest energy")
    return InterpretationTriple(
        ito=SdeModel(f=f_ito, interpretation=Interpretation.ITO,
                     label="relativistic-ito", **kwargs),
        stratonovich=SdeModel(f=f_strat, interpretation=Interpretation.STRATONOVICH,
                              label="relativistic-strat", **kwargs),
        hk=SdeModel(f=f_hk, interpretation=Interpretation.HAENGGI_KLIMONTOVICH,
                    label="relativistic-hk", **kwargs),
    )


def family_models(name: str, params=None) -> InterpretationTriple:
    """Factory lookup by family name."""
    if name == "langevin1":
        return kinetic_models(params or LangevinParams())
    if name == "langevin2":
        p = params or LangevinParams(u0=1.0)
        return two_particle_models(p)
    if name == "relativistic":
        return relativistic_models(params or RelativisticParams())
    raise ValueError(f"unknown model family {name!r}; expected one of {FAMILIES}")


def langevin_velocity_pair(
    params: LangevinParams, grid: TimeGrid, seed: SeedSpec,
) -> tuple[SamplePath, SamplePath, SamplePath, SamplePath]:
    """Euler velocities (U, V) of the two-particle system plus the driving
    Brownian pair (B, W), all on one grid.

    The velocities are stepped with the same increments that ``B`` and
    ``W`` carry, which is what the composite-noise construction needs.
    """
    if params.u0 is None:
        raise ValueError("two-particle system needs u0")
    drivers = generate_brownian_vector(grid, 2, seed)
    db = np.diff(drivers.values[:, 0])
    dw = np.diff(drivers.values[:, 1])
    dts = grid.spacings
    k = params.gamma / params.m
    s = params.sigma / params.m
    u = np.empty(len(grid))
    v = np.empty(len(grid))
    u[0], v[0] = params.u0, params.v0
    for j in range(grid.n_steps):
        u[j + 1] = u[j] - k * u[j] * dts[j] + s * db[j]
        v[j + 1] = v[j] - k * v[j] * dts[j] + s * dw[j]
    return (SamplePath(grid, u), SamplePath(grid, v),
            drivers.component(0), drivers.component(1))


def levy_composite_brownian(
    u: SamplePath, v: SamplePath, b: SamplePath, w: SamplePath,
) -> SamplePath:
    """Composite process ``int U/r dB + int V/r dW`` with ``r = |(U, V)|``.

    Left-rule cumulative sums; at ``(U, V) = (0, 0)`` the integrand is set
    to ``(1, 0)`` (a null set of the law, documented rather than
    randomized).  The result is a Brownian motion in law, which realized
    quadratic variation near ``t`` verifies.
    """
    _check_same_grid(u, v)
    _check_same_grid(u, b)
    _check_same_grid(u, w)
    r = np.hypot(u.values[:-1], v.values[:-1])
    safe = r > 0
    cu = np.where(safe, np.divide(u.values[:-1], r, where=safe), 1.0)
    cv = np.where(safe, np.divide(v.values[:-1], r, where=safe), 0.0)
    increments = cu * b.increments() + cv * w.increments()
    out = np.concatenate([[0.0], np.cumsum(increments)])
    return SamplePath(u.grid, out)


@dataclass(frozen=True)
class MemberDiagnostics:
    interpretation: Interpretation
    scheme: SolverScheme
    first_step_drift: float
    violation_fraction: float
    interior_fraction: float
    stuck_fraction: float

    def to_json_dict(self) -> dict:
        return {
            "interpretation": self.interpretation.value,
            "scheme": self.scheme.value,
            "rest_start": {
                "first_step_drift": self.first_step_drift,
                "violation_fraction": self.violation_fraction,
                "interior_fraction": self.interior_fraction,
                "stuck_fraction": self.stuck_fraction,
            },
        }


@dataclass(frozen=True)
class RestStartReport:
    members: tuple[MemberDiagnostics, ...]

    def member(self, interpretation: Interpretation) -> MemberDiagnostics:
        for m in self.members:
            if m.interpretation is interpretation:
                return m
        raise KeyError(interpretation)


def rest_start_diagnostics(
    trio: InterpretationTriple,
    dt: float,
    n_seeds: int,
    seed: SeedSpec = SeedSpec(0),
    horizon: float = 1.0,
) -> RestStartReport:
    """Boundary-start comparison across the three interpretations.

    Each member runs its own direct scheme.  The Ito and Stratonovich
    members run with reflection at the boundary (their boundary is
    instantaneously reflecting, so folding is the physical handling); the
    HK member runs with stop-on-violation so that an entrance-boundary
    escape is observed rather than masked.  Reported per member: the
    deterministic first-step drift contribution, the fraction of paths
    with a domain violation, the fraction strictly inside the open domain
    at the horizon, and the fraction that never left the starting point.
    """
    members = []
    for offset, model in enumerate(trio.members()):
        scheme = scheme_for(model.interpretation)
        lo, hi = model.domain
        boundary: Boundary
        if model.interpretation is Interpretation.HAENGGI_KLIMONTOVICH:
            boundary = STOP_ON_VIOLATION
        else:
            boundary = Reflect(lo, hi)
        cfg = McConfig(
            n_paths=n_seeds, dt=dt, horizon=horizon,
            seed=seed.shifted(offset * n_seeds), boundary=boundary,
            record="terminal",
        )
        raw = _run_engine(model, scheme, cfg.times(), cfg.n_paths, cfg.seed,
                          cfg.boundary, record="terminal")
        interior = raw.completed & (raw.terminal > lo) & (raw.terminal < hi)
        stuck = raw.completed & ~raw.moved
        members.append(MemberDiagnostics(
            interpretation=model.interpretation,
            scheme=scheme,
            first_step_drift=float(model.f(model.x0, 0.0)) * dt,
            violation_fraction=float((raw.violations > 0).mean()),
            interior_fraction=float(interior.mean()),
            stuck_fraction=float(stuck.mean()),
        ))
    return RestStartReport(tuple(members))


def boundary_hitting_study(
    trio: InterpretationTriple,
    level: float,
    band: float,
    cfg: McConfig,
) -> dict[Interpretation, HittingStats]:
    """Hitting statistics of the boundary band for each member.

    Ito and Stratonovich members reflect at the domain edge; the HK member
    stops on violation (a violating value through the band counts as a
    hit).  Members use disjoint seed blocks.
    """
    out: dict[Interpretation, HittingStats] = {}
    for offset, model in enumerate(trio.members()):
        lo, hi = model.domain
        if model.interpretation is Interpretation.HAENGGI_KLIMONTOVICH:
            boundary: Boundary = STOP_ON_VIOLATION
        else:
            boundary = Reflect(lo, hi)
        member_cfg = McConfig(
            n_paths=cfg.n_paths, dt=cfg.dt, horizon=cfg.horizon,
            seed=cfg.seed.shifted(offset * cfg.n_paths), boundary=boundary,
            record="terminal",
        )
        out[model.interpretation] = hitting_time(
            model, scheme_for(model.interpretation), level, band, member_cfg)
    return out
