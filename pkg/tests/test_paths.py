import io

import numpy as np
import pytest

from noisecalc.paths import (
    SamplePath,
    SeedSpec,
    TimeGrid,
    VectorPath,
    generate_brownian,
    generate_brownian_vector,
    refine_bridge,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.5])
    with pytest.raises(ValueError):
        TimeGrid([-0.1, 0.5])
    g = TimeGrid.uniform(0.0, 1.0, 4)
    assert g.n_steps == 4
    assert g.diameter == pytest.approx(0.25)


def test_nonuniform_grid_diameter():
    g = TimeGrid([0.0, 0.1, 0.5, 0.6])
    assert g.diameter == pytest.approx(0.4)
    assert len(g) == 4


def test_path_length_and_finiteness_checked():
    g = TimeGrid.uniform(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        SamplePath(g, [0.0, 1.0])
    with pytest.raises(ValueError):
        SamplePath(g, [0.0, np.inf, 1.0])


def test_brownian_starts_at_zero_any_seed():
    g = TimeGrid.uniform(0.0, 2.0, 37)
    for s in (0, 1, 99):
        assert generate_brownian(g, SeedSpec(123, s)).values[0] == 0.0


def test_brownian_determinism():
    g = TimeGrid.uniform(0.0, 1.0, 64)
    a = generate_brownian(g, SeedSpec(7, 3))
    b = generate_brownian(g, SeedSpec(7, 3))
    assert np.array_equal(a.values, b.values)
    c = generate_brownian(g, SeedSpec(7, 4))
    assert not np.array_equal(a.values, c.values)


def test_brownian_terminal_variance():
    # W_1 variance over 1e4 substreams on a 2^16-step grid
    g = TimeGrid.uniform(0.0, 1.0, 2**16)
    w1 = np.array([generate_brownian(g, SeedSpec(20240801, s)).final_value
                   for s in range(10_000)])
    assert 0.97 <= w1.var(ddof=1) <= 1.03


def test_increment_variance_matches_step():
    # fixed step h: empirical increment variance within 3 sigma of h
    h = 0.25
    g = TimeGrid.uniform(0.0, 5.0, 20)
    incs = np.concatenate([
        generate_brownian(g, SeedSpec(55, s)).increments() for s in range(500)
    ])
    n = incs.size
    se = h * np.sqrt(2.0 / (n - 1))
    assert abs(incs.var(ddof=1) - h) < 3 * se


def test_bridge_pins_original_values():
    g = TimeGrid.uniform(0.0, 1.0, 16)
    w = generate_brownian(g, SeedSpec(1))
    r = refine_bridge(w, 4, SeedSpec(1, 1))
    assert np.array_equal(r.values[::4], w.values)
    assert np.array_equal(r.grid.points[::4], g.points)


def test_bridge_midpoint_conditional_mean():
    # pinned endpoints (0,0) and (1,2): midpoint mean is the chord value 1.0
    g = TimeGrid([0.0, 1.0])
    base = SamplePath(g, [0.0, 2.0])
    mids = np.array([
        refine_bridge(base, 2, SeedSpec(10, s)).values[1] for s in range(4000)
    ])
    assert mids.mean() == pytest.approx(1.0, abs=4 * 0.5 / np.sqrt(4000))
    # conditional variance dt*(1-dt)/1 = 0.25
    assert mids.var(ddof=1) == pytest.approx(0.25, rel=0.15)


def test_bridge_rejects_factor_below_two():
    g = TimeGrid.uniform(0.0, 1.0, 4)
    w = generate_brownian(g, SeedSpec(3))
    with pytest.raises(ValueError):
        refine_bridge(w, 1, SeedSpec(3, 1))


def test_bridge_refined_quadratic_variation():
    # refine 8x: realized QV within 5% of 1 for >= 95% of 200 seeds
    g = TimeGrid.uniform(0.0, 1.0, 512)
    hits = 0
    for s in range(200):
        w = generate_brownian(g, SeedSpec(1066, s))
        r = refine_bridge(w, 8, SeedSpec(1066, 10_000 + s))
        qv = float(np.sum(np.diff(r.values) ** 2))
        hits += abs(qv - 1.0) < 0.05
    assert hits >= 190


def test_bridge_consistency_in_moments():
    # direct fine-grid generation vs coarse + bridge: same mean/variance
    # at the shared times, within Monte Carlo bands
    n_seeds = 3000
    fine = TimeGrid.uniform(0.0, 1.0, 8)
    coarse = TimeGrid.uniform(0.0, 1.0, 4)
    direct = np.stack([generate_brownian(fine, SeedSpec(77, s)).values
                       for s in range(n_seeds)])
    bridged = np.stack([
        refine_bridge(generate_brownian(coarse, SeedSpec(991, s)), 2,
                      SeedSpec(991, n_seeds + s)).values
        for s in range(n_seeds)
    ])
    t = fine.points[1:]
    se = t * np.sqrt(2.0 / n_seeds)
    assert np.all(np.abs(direct[:, 1:].var(axis=0) - bridged[:, 1:].var(axis=0)) < 4 * se)
    mean_se = np.sqrt(t / n_seeds)
    assert np.all(np.abs(direct[:, 1:].mean(axis=0)) < 4 * mean_se)
    assert np.all(np.abs(bridged[:, 1:].mean(axis=0)) < 4 * mean_se)


def test_vector_components_independent():
    g = TimeGrid([0.0, 1.0])
    finals = np.array([
        generate_brownian_vector(g, 2, SeedSpec(31, s)).values[-1]
        for s in range(10_000)
    ])
    cov = np.cov(finals.T)[0, 1]
    assert abs(cov) < 0.05
    assert np.array_equal(
        generate_brownian_vector(g, 2, SeedSpec(31, 0)).values[0], [0.0, 0.0])


def test_vector_m1_matches_scalar_substream():
    g = TimeGrid.uniform(0.0, 1.0, 32)
    vec = generate_brownian_vector(g, 1, SeedSpec(5, 9))
    scalar = generate_brownian(g, SeedSpec(5, 9))
    assert np.array_equal(vec.values[:, 0], scalar.values)


def test_vector_rejects_bad_dimension():
    g = TimeGrid.uniform(0.0, 1.0, 4)
    with pytest.raises(ValueError):
        generate_brownian_vector(g, 0, SeedSpec(1))


def test_csv_round_trip_precision():
    g = TimeGrid.uniform(0.0, 1.0, 8)
    w = generate_brownian(g, SeedSpec(17))
    buf = io.StringIO()
    w.write_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "t,value"
    parsed = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(parsed[:, 1], w.values)

    vp = generate_brownian_vector(g, 2, SeedSpec(17))
    buf = io.StringIO()
    vp.write_csv(buf)
    head = buf.getvalue().splitlines()[0]
    assert head == "t,x1,x2"


def test_vector_path_component_view():
    g = TimeGrid.uniform(0.0, 1.0, 4)
    vp = VectorPath(g, np.arange(10, dtype=float).reshape(5, 2))
    assert np.array_equal(vp.component(1).values, [1.0, 3.0, 5.0, 7.0, 9.0])
