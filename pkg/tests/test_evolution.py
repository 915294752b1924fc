import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singdamp.damping import DampingSpec, constant_damping, sharp_damping
from singdamp.discretize import State, assemble_A, circle_grid, damping_on_grid, state_energy
from singdamp.evolution import (
    CrankNicolson,
    EnergyTrace,
    dnorm,
    evolve,
    evolve_torus,
    extinction_probe,
    fit_decay,
    h_norm,
    random_state,
    riesz_project,
    step_cn,
    windowed_exponents,
)

EMPTY = DampingSpec(())


def stencil_eigenvalue(k, dx):
    return 2.0 / dx**2 * (1.0 - math.cos(k * dx))


def test_projection_of_constants_and_of_mean_free_velocity():
    grid = circle_grid(64)
    pi0, pidot = riesz_project(State(np.ones(64), np.zeros(64), grid), sharp_damping(-0.5))
    assert np.allclose(pi0.u, 1.0) and np.allclose(pidot.u, 0.0) and np.allclose(pidot.v, 0.0)
    pi0, _ = riesz_project(State(np.zeros(64), np.sin(grid.nodes), grid), constant_damping(1.0))
    assert np.allclose(pi0.u, 0.0)


def test_projection_needs_damping():
    grid = circle_grid(32)
    with pytest.raises(ValueError):
        riesz_project(State(np.ones(32), np.zeros(32), grid), EMPTY)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([-0.75, -0.5, 0.0, 1.0]))
def test_projection_is_idempotent_and_annihilates_the_mean(seed, beta):
    grid = circle_grid(64)
    spec = sharp_damping(beta)
    rng = np.random.default_rng(seed)
    state = State(rng.standard_normal(64), rng.standard_normal(64), grid)
    _, once = riesz_project(state, spec)
    _, twice = riesz_project(once, spec)
    scale = np.linalg.norm(state.stacked())
    assert np.linalg.norm(twice.stacked() - once.stacked()) <= 1e-12 * scale
    w = damping_on_grid(spec, grid)
    assert abs(np.sum(w * once.u + once.v)) <= 1e-12 * (np.sum(w) * scale + scale)


def test_kernel_is_a_fixed_point_of_the_step():
    grid = circle_grid(64)
    op = assemble_A(grid, sharp_damping(-0.5))
    out = step_cn(State(np.ones(64), np.zeros(64), grid), op, 0.1)
    assert np.allclose(out.u, 1.0, atol=1e-14) and np.allclose(out.v, 0.0, atol=1e-14)


def _mode_error_after_period(dt):
    grid = circle_grid(64)
    freq = math.sqrt(stencil_eigenvalue(1, grid.dx))
    period = 2 * math.pi / freq
    steps = int(round(period / dt))
    cn = CrankNicolson(assemble_A(grid, EMPTY).matrix, period / steps)
    start = State(np.cos(grid.nodes), np.zeros(64), grid).stacked()
    vec = start
    for _ in range(steps):
        vec = cn.step(vec)
    return np.linalg.norm(vec - start) / np.linalg.norm(start)


def test_undamped_mode_returns_after_one_period_at_second_order():
    errors = [_mode_error_after_period(dt) for dt in (0.04, 0.02, 0.01)]
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.1)


def _companion_error(dt, c=0.4, k=2, T=3.0):
    # mode cos(kx) with W = 2c: a'' + 2c a' + K a = 0, a(0) = 1, a'(0) = 0
    grid = circle_grid(64)
    kk = stencil_eigenvalue(k, grid.dx)
    omega = math.sqrt(kk - c * c)
    steps = int(round(T / dt))
    cn = CrankNicolson(assemble_A(grid, constant_damping(2 * c)).matrix, T / steps)
    vec = State(np.cos(k * grid.nodes), np.zeros(64), grid).stacked()
    for _ in range(steps):
        vec = cn.step(vec)
    amp = math.exp(-c * T) * (math.cos(omega * T) + c / omega * math.sin(omega * T))
    return np.max(np.abs(vec[:64] - amp * np.cos(k * grid.nodes)))


def test_constant_damping_matches_the_scalar_ode_at_second_order():
    errors = [_companion_error(dt) for dt in (0.02, 0.01, 0.005)]
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.1)


def test_undamped_energy_is_conserved():
    grid = circle_grid(128)
    state = State(np.sin(3 * grid.nodes) + 0.2 * np.cos(grid.nodes), np.cos(2 * grid.nodes), grid)
    trace = evolve(state, EMPTY, 100.0, 0.05, stride=20, project=False)
    assert np.max(np.abs(trace.energies / trace.energies[0] - 1)) < 1e-6
    assert extinction_probe(trace).status == "pass"
    assert extinction_probe(trace).min_ratio == pytest.approx(1.0, abs=1e-6)


def test_unit_damping_decays_at_the_companion_rate():
    grid = circle_grid(64)
    state = State(np.cos(grid.nodes), np.zeros(64), grid)
    trace = evolve(state, constant_damping(1.0), 40.0, 0.01, stride=10)
    # W = 1 puts the roots at Re = -1/2, so the energy decays like exp(-t)
    assert fit_decay(trace, "exponential", (4.0, 40.0)).value == pytest.approx(1.0, abs=0.02)


def _dissipation_defects(spec, seed, steps=40, dt=0.02):
    grid = circle_grid(128)
    w = damping_on_grid(spec, grid)
    cn = CrankNicolson(assemble_A(grid, spec).matrix, dt)
    vec = random_state(grid, spec, seed=seed).stacked()
    worst = 0.0
    for _ in range(steps):
        new = cn.step(vec)
        e0 = state_energy(State.from_stacked(vec, grid))
        e1 = state_energy(State.from_stacked(new, grid))
        mid = 0.5 * (vec[128:] + new[128:])
        predicted = -dt * float(np.sum(w * np.abs(mid) ** 2)) * grid.dx
        worst = max(worst, abs((e1 - e0) - predicted) / e0)
        assert e1 <= e0 * (1 + 1e-12)
        vec = new
    return worst


@pytest.mark.parametrize("beta", [-0.75, -0.5, 0.0, 1.0])
def test_discrete_dissipation_identity(beta):
    assert _dissipation_defects(sharp_damping(beta), seed=int(10 * (beta + 1))) < 1e-10


def test_quasi_contraction_bound_holds():
    grid = circle_grid(128)
    for spec in (sharp_damping(-0.5), constant_damping(1.0)):
        w0 = float(np.min(damping_on_grid(spec, grid)))
        growth = 0.5 * (math.sqrt(1 + w0 * w0) - w0)
        dt = 0.02
        cn = CrankNicolson(assemble_A(grid, spec).matrix, dt)
        # the kernel part of the state is kept on purpose; it makes the bound nearly sharp
        state = State(np.ones(128) + np.sin(grid.nodes), np.cos(2 * grid.nodes), grid)
        vec = state.stacked()
        start = h_norm(state)
        for i in range(1, 201):
            vec = cn.step(vec)
            assert h_norm(State.from_stacked(vec, grid)) <= math.exp(growth * i * dt) * start * (1 + 1e-12)


def test_semigroup_property():
    grid = circle_grid(128)
    spec = sharp_damping(-0.5)
    state = random_state(grid, spec, seed=5)
    whole = evolve(state, spec, 3.0, 0.01, project=False).final
    first = evolve(state, spec, 1.2, 0.01, project=False).final
    second = evolve(State.from_stacked(first, grid), spec, 1.8, 0.01, project=False).final
    assert np.linalg.norm(whole - second) <= 1e-10 * np.linalg.norm(whole)


def test_projection_commutes_with_the_step():
    grid = circle_grid(128)
    spec = sharp_damping(-0.25)
    op = assemble_A(grid, spec)
    rng = np.random.default_rng(2)
    state = State(rng.standard_normal(128), rng.standard_normal(128), grid)
    _, a = riesz_project(step_cn(state, op, 0.05), spec)
    b = step_cn(riesz_project(state, spec)[1], op, 0.05)
    assert np.linalg.norm(a.stacked() - b.stacked()) <= 1e-10 * np.linalg.norm(state.stacked())


def test_torus_mode_zero_reduces_to_the_circle():
    grid = circle_grid(64)
    spec = sharp_damping(-0.5)
    state = random_state(grid, spec, seed=1)
    circle = evolve(state, spec, 2.0, 0.02, stride=5)
    torus = evolve_torus(spec, grid, [0], {0: state}, 2.0, 0.02, stride=5)
    assert np.allclose(torus.aggregate.energies, circle.energies, rtol=1e-12)


def test_torus_aggregate_is_the_sum_of_modes():
    grid = circle_grid(64)
    spec = sharp_damping(0.0)
    state = State(np.sin(grid.nodes), np.zeros(64), grid)
    torus = evolve_torus(spec, grid, range(6), {3: state}, 2.0, 0.02, stride=5)
    assert np.allclose(torus.aggregate.energies, torus.modal[3].energies, rtol=1e-12)
    assert all(np.all(torus.modal[m].energies == 0) for m in (0, 1, 2, 4, 5))
    total = np.sum([tr.energies for tr in torus.modal.values()], axis=0)
    assert np.allclose(total, torus.aggregate.energies, rtol=1e-12)
    # the shifted Laplacian makes the mode-3 energy include 9 |u|^2 / 2
    single = evolve(state, spec, 2.0, 0.02, stride=5, project=False, mode_shift=9.0)
    assert np.allclose(single.energies, torus.modal[3].energies, rtol=1e-12)


def test_sharp_damping_never_goes_extinct():
    grid = circle_grid(128)
    spec = sharp_damping(-0.5)
    trace = evolve(random_state(grid, spec, seed=0), spec, 200.0, 0.05, stride=20)
    report = extinction_probe(trace)
    assert report.status == "pass" and report.min_ratio > 1e-14


def test_extinction_probe_classifies_roundoff_and_jumps():
    t = np.linspace(0, 100, 201)
    gradual = EnergyTrace(t, np.exp(-0.5 * t), 1.0)
    assert extinction_probe(gradual).status == "inconclusive"
    energies = np.ones_like(t)
    energies[150:] = 1e-20
    assert extinction_probe(EnergyTrace(t, energies, 1.0)).status == "fail"
    with pytest.raises(ValueError):
        extinction_probe(EnergyTrace(t, np.zeros_like(t), 1.0))


def test_synthetic_decay_fits():
    t = np.linspace(0, 50, 501)
    assert fit_decay(EnergyTrace(t, np.exp(-0.8 * t), 1.0)).value == pytest.approx(0.8, abs=1e-6)
    t = np.linspace(0, 1000, 1001)
    power = EnergyTrace(t, np.concatenate([[1.0], t[1:] ** -1.2]), 1.0)
    assert fit_decay(power, "polynomial").value == pytest.approx(0.6, abs=1e-6)
    assert all(v == pytest.approx(0.6, abs=1e-6) for v in windowed_exponents(power).values())


def test_fit_preconditions():
    t = np.linspace(0, 10, 11)
    trace = EnergyTrace(t, np.exp(-t), 1.0)
    with pytest.raises(ValueError):
        fit_decay(trace)
    t = np.linspace(0, 10, 101)
    trace = EnergyTrace(t, np.where(t > 5, 0.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        fit_decay(trace, window=(1.0, 10.0))
    with pytest.raises(ValueError):
        fit_decay(EnergyTrace(t, np.ones_like(t), 1.0), "polynomial", (0.0, 10.0))


def test_step_count_must_divide_the_horizon():
    grid = circle_grid(32)
    with pytest.raises(ValueError):
        evolve(State(np.zeros(32), np.zeros(32), grid), sharp_damping(0.0), 1.0, 0.3)


def test_random_state_has_unit_graph_norm():
    grid = circle_grid(128)
    spec = sharp_damping(-0.5)
    state = random_state(grid, spec, seed=4)
    assert dnorm(state, spec) == pytest.approx(1.0)
    assert np.array_equal(random_state(grid, spec, seed=4).u, state.u)
