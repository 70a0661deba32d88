import math

import numpy as np
import pytest

from noisecalc.fokker_planck import (
    ExtremumKind,
    FpeProblem,
    GridDensity,
    Stability,
    analyze_fixed_points,
    compare_modes,
    evolve_fpe,
    nonequilibrium_potential,
    probability_flux,
    relative_entropy,
    stationary_density,
)

ONE = lambda x, t: np.ones_like(np.asarray(x, dtype=float))
ZERO = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
SQRT2 = lambda x, t: np.full_like(np.asarray(x, dtype=float), math.sqrt(2.0))
NEG_X = lambda x, t: -np.asarray(x, dtype=float)
DOUBLE_WELL = lambda x, t: np.asarray(x, dtype=float) - np.asarray(x, dtype=float) ** 3


def test_zero_drift_unit_diffusion_is_uniform():
    d = stationary_density(ZERO, ONE, (0.0, 1.0), 64)
    assert np.allclose(d.values, 1.0, atol=1e-14)


def test_ou_stationary_matches_closed_form():
    d = stationary_density(NEG_X, SQRT2, (-3.0, 3.0), 512)
    c = d.centers
    closed = np.exp(-c**2 / 2)
    closed /= math.sqrt(2 * math.pi) * math.erf(3 / math.sqrt(2.0))
    assert np.max(np.abs(d.values / closed - 1.0)) < 1e-6


def test_double_well_potential_structure():
    d = stationary_density(DOUBLE_WELL, ONE, (-2.0, 2.0), 256)
    i_max = np.argsort(d.values)[-2:]
    peaks = np.sort(d.centers[i_max])
    assert abs(peaks[0] + 1.0) <= d.dx
    assert abs(peaks[1] - 1.0) <= d.dx
    mid = np.argmin(np.abs(d.centers))
    assert d.values[mid] < d.values[mid - 10]


def test_potential_is_cumulative_trapezoid_from_left_edge():
    xs = np.linspace(-1.0, 2.0, 7)[1:]
    v = nonequilibrium_potential(NEG_X, SQRT2, -1.0, 2.0, xs)
    # integrand -x is linear: trapezoid is exact, V(x) = (1 - x^2)/2
    assert np.allclose(v, (1.0 - xs**2) / 2, atol=1e-14)


def test_vanishing_diffusion_rejected_with_location():
    g = lambda x, t: np.asarray(x, dtype=float)  # hits 0 at the left edge
    with pytest.raises(ValueError, match="bounded away"):
        stationary_density(ZERO, g, (0.0, 1.0), 32)


def test_uniform_state_is_fpe_fixed_point():
    init = GridDensity.uniform(0.0, 1.0, 64)
    prob = FpeProblem(f=ZERO, g=ONE, interval=(0.0, 1.0), initial=init, dgdx=ZERO)
    res = evolve_fpe(prob, 0.5 * prob.stability_bound(), 0.5)
    assert np.allclose(res.final.values, 1.0, atol=1e-13)
    assert res.mass_drift < 1e-13


def test_ou_relaxation_and_mass_conservation():
    n = 256
    init = GridDensity.from_function(
        lambda x: np.exp(-0.5 * ((x - 1.0) / 0.5) ** 2), -3.0, 3.0, n)
    prob = FpeProblem(f=NEG_X, g=SQRT2, interval=(-3.0, 3.0), initial=init, dgdx=ZERO)
    dt = 1e-4
    res = evolve_fpe(prob, dt, 10_000 * dt)  # exactly 1e4 steps
    assert res.mass_drift <= 1e-8
    target = stationary_density(NEG_X, SQRT2, (-3.0, 3.0), n)
    # T = 1 is about one relaxation time; partial decay toward the target
    h0 = relative_entropy(init, target)
    h1 = relative_entropy(res.final, target)
    assert h1 < 0.2 * h0


def test_cfl_violation_rejected_with_admissible_dt():
    init = GridDensity.uniform(-1.0, 1.0, 64)
    prob = FpeProblem(f=ZERO, g=ONE, interval=(-1.0, 1.0), initial=init, dgdx=ZERO)
    bound = prob.stability_bound()
    with pytest.raises(ValueError, match="admissible"):
        evolve_fpe(prob, 2 * bound, 1.0)


def test_flux_uniform_no_drift_is_zero():
    p = GridDensity.uniform(0.0, 1.0, 64)
    j = probability_flux(p, ZERO, ONE, dgdx=ZERO)
    assert np.max(np.abs(j)) < 1e-14


def test_flux_sign_with_positive_drift():
    p = GridDensity.uniform(0.0, 1.0, 64)
    j = probability_flux(p, lambda x, t: np.ones_like(np.asarray(x, dtype=float)),
                         ONE, dgdx=ZERO)
    assert np.all(j[1:-1] > 0)


def test_flux_vanishes_on_stationary_density():
    # discretization of an identically-zero field; the operator is
    # second-order, reaching the 1e-4 scale from 512 cells up
    d256 = stationary_density(DOUBLE_WELL, ONE, (-2.0, 2.0), 256)
    j256 = np.max(np.abs(probability_flux(d256, DOUBLE_WELL, ONE, dgdx=ZERO)))
    assert j256 < 5e-4
    d512 = stationary_density(DOUBLE_WELL, ONE, (-2.0, 2.0), 512)
    j512 = np.max(np.abs(probability_flux(d512, DOUBLE_WELL, ONE, dgdx=ZERO)))
    assert j512 < 1e-4
    ratio = j256 / j512
    # halving the cells must at least halve the bound (measured: ~4, second
    # order; the lower edge guards the first-order floor)
    assert 1.7 <= ratio <= 4.6


def test_relative_entropy_basics():
    p = stationary_density(NEG_X, SQRT2, (-3.0, 3.0), 128)
    assert relative_entropy(p, p) == 0.0
    rng = np.random.default_rng(3)
    for _ in range(100):
        a = GridDensity(-1.0, 1.0, rng.uniform(0.05, 1.0, 32))
        b = GridDensity(-1.0, 1.0, rng.uniform(0.05, 1.0, 32))
        assert relative_entropy(a, b) >= 0.0


def test_relative_entropy_infinite_when_support_mismatch():
    vals = np.zeros(16)
    vals[3] = 1.0
    p = GridDensity(0.0, 1.0, np.full(16, 1.0))
    q = GridDensity(0.0, 1.0, vals)
    assert relative_entropy(p, q) == math.inf


def test_entropy_monotone_along_randomized_problems():
    rng = np.random.default_rng(11)
    for trial in range(5):
        a_coef, b_coef = rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)
        c_coef = rng.uniform(0.2, 0.8)
        f = lambda x, t, a=a_coef, b=b_coef: b - a * np.asarray(x, dtype=float)
        g = lambda x, t, c=c_coef: 1.0 + c * np.tanh(np.asarray(x, dtype=float))
        init = GridDensity.from_function(
            lambda x: np.exp(-2.0 * (x - 1.0) ** 2), -2.0, 2.0, 128)
        prob = FpeProblem(f=f, g=g, interval=(-2.0, 2.0), initial=init)
        res = evolve_fpe(prob, 0.9 * prob.stability_bound(), 2.0, snapshot_every=0.1)
        target = stationary_density(f, g, (-2.0, 2.0), 128)
        h = np.array([relative_entropy(s, target) for s in res.snapshots])
        assert np.all(np.diff(h) <= 1e-10), f"trial {trial}"


def test_fixed_points_linear_drift():
    report = analyze_fixed_points(lambda x: -x, lambda x: -1.0, (-2.0, 2.0))
    assert len(report.fixed_points) == 1
    fp = report.fixed_points[0]
    assert abs(fp.x) < 1e-9
    assert fp.stability is Stability.STABLE
    d = stationary_density(NEG_X, ONE, (-2.0, 2.0), 128)
    matched = compare_modes(report, d)
    assert len(matched.matches) == 1
    assert matched.matches[0][2] <= d.dx


def test_fixed_points_double_well():
    report = analyze_fixed_points(lambda x: x - x**3, lambda x: 1 - 3 * x**2,
                                  (-2.0, 2.0))
    xs = sorted(fp.x for fp in report.fixed_points)
    assert np.allclose(xs, [-1.0, 0.0, 1.0], atol=1e-9)
    stabs = {round(fp.x): fp.stability for fp in report.fixed_points}
    assert stabs[-1] is Stability.STABLE
    assert stabs[0] is Stability.UNSTABLE
    assert stabs[1] is Stability.STABLE

    d = stationary_density(DOUBLE_WELL, ONE, (-2.0, 2.0), 256)
    matched = compare_modes(report, d)
    kinds = {e.kind for e in matched.extrema}
    assert kinds == {ExtremumKind.MAX, ExtremumKind.MIN}
    assert len(matched.matches) == 3
    for _, _, gap in matched.matches:
        assert gap <= d.dx


def test_degenerate_fixed_point_flagged():
    report = analyze_fixed_points(lambda x: x**3, lambda x: 3 * x**2, (-1.0, 1.0))
    assert any(fp.stability is Stability.DEGENERATE for fp in report.fixed_points)


def test_mode_locations_invariant_under_diffusion_scaling():
    # scaling g by a constant rescales the potential but moves no extremum
    base = stationary_density(DOUBLE_WELL, ONE, (-2.0, 2.0), 256)
    for lam in (0.5, 2.0):
        g = lambda x, t, s=lam: np.full_like(np.asarray(x, dtype=float), s)
        d = stationary_density(DOUBLE_WELL, g, (-2.0, 2.0), 256)
        report = analyze_fixed_points(lambda x: x - x**3, lambda x: 1 - 3 * x**2,
                                      (-2.0, 2.0))
        m_base = compare_modes(report, base)
        m_lam = compare_modes(report, d)
        for (x1, mode1, _), (x2, mode2, _) in zip(m_base.matches, m_lam.matches):
            assert abs(mode1 - mode2) <= base.dx


def test_grid_density_point_mass_and_clipping():
    d = GridDensity.point_mass(0.0, 1.0, 10, 0.35)
    assert d.mass == pytest.approx(1.0)
    assert np.count_nonzero(d.values) == 1
    clipped = GridDensity(0.0, 1.0, np.array([1.0, -1e-13, 1.0, 1.0]))
    assert clipped.clipped
    assert clipped.values.min() == 0.0
    with pytest.raises(ValueError):
        GridDensity(0.0, 1.0, np.array([1.0, -1e-3, 1.0, 1.0]))


def test_grid_density_requires_matching_grids():
    a = GridDensity.uniform(0.0, 1.0, 8)
    b = GridDensity.uniform(0.0, 1.0, 16)
    with pytest.raises(ValueError):
        relative_entropy(a, b)


def test_fpe_problem_checks_initial_interval():
    init = GridDensity.uniform(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        FpeProblem(f=ZERO, g=ONE, interval=(-1.0, 1.0), initial=init)
