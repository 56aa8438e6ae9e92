"""Discrete generator, inner infimum, obstacle, and single backward steps."""

from dataclasses import replace

import numpy as np
import pytest

import switchgame as sg
from switchgame.hjb import SchemeOperators, generator_apply, hamiltonian, switch_obstacle

from conftest import make_two_regime_spec


@pytest.fixture(scope="module")
def ek_small():
    bench = sg.get_benchmark("ek_example")
    grid = sg.build_grid(bench.spec, (-2.0, 2.0), 41, 40)
    return bench.spec, grid


def test_generator_linear_field_is_exact_upwind(ek_small):
    spec, grid = ek_small
    phi = grid.axes[0].copy()  # phi(x) = x
    # drift -|1 - 2| = -1, no diffusion: upwind slope of x is exactly 1
    val = generator_apply(spec, grid, phi, (7,), 1, 2)
    assert val == pytest.approx(-1.0, abs=1e-13)


def test_generator_constant_field_vanishes(ek_small):
    spec, grid = ek_small
    phi = np.full(grid.shape, 3.25)
    for i in (1, 2):
        for u in spec.control_set:
            assert generator_apply(spec, grid, phi, (5,), i, u) == 0.0


def test_generator_quadratic_second_difference():
    bench = sg.get_benchmark("pure_diffusion_quadratic")
    grid = sg.build_grid(bench.spec, (-1.0, 1.0), 21, 1)
    phi = grid.axes[0] ** 2
    c = grid.center_index()
    # b = 0, sigma = 1: L = 0.5 * second difference of x**2 = 1 exactly
    val = generator_apply(bench.spec, grid, phi, c, 1, 0.0)
    assert val == pytest.approx(1.0, rel=1e-12)


def test_generator_rejects_boundary_nodes(ek_small):
    spec, grid = ek_small
    phi = grid.axes[0].copy()
    with pytest.raises(ValueError):
        generator_apply(spec, grid, phi, (0,), 1, 1)
    with pytest.raises(ValueError):
        generator_apply(spec, grid, phi, (grid.nx[0] - 1,), 1, 1)


def test_generator_matches_vectorised_operators():
    rng = np.random.default_rng(5)
    spec = make_two_regime_spec(rng)
    grid = sg.build_grid(spec, (-1.0, 1.0), 21, 10)
    ops = SchemeOperators(spec, grid)
    phi = rng.standard_normal(grid.shape)
    for i in (1, 2):
        for ui, u in enumerate(spec.control_set):
            interior = ops.generator_interior(phi, i - 1, ui)
            for node in (1, 7, 19):
                got = generator_apply(spec, grid, phi, (node,), i, u)
                assert got == pytest.approx(interior[node - 1], rel=1e-12, abs=1e-12)


def test_hamiltonian_picks_the_adversarial_control(ek_small):
    spec, grid = ek_small
    phi = grid.axes[0].copy()  # slope one
    val, u = hamiltonian(spec, grid, phi, (9,), 1)
    assert val == pytest.approx(-1.0, abs=1e-13)
    assert u == 2  # min over {0, -1} is attained by the mismatched control


def test_hamiltonian_no_dynamics_ties_break_to_first_control():
    bench = sg.get_benchmark("no_dynamics")
    grid = sg.build_grid(bench.spec, (-2.0, 2.0), 21, 2)
    phi = np.zeros(grid.shape)
    val, u = hamiltonian(bench.spec, grid, phi, (5,), 1)
    assert val == 0.0
    assert u == bench.spec.control_set[0]


def test_hamiltonian_minimises_running_reward():
    bench = sg.get_benchmark("ek_example")
    spec = replace(
        bench.spec,
        drift=lambda x, i, u: np.zeros_like(x),
        running_cost=lambda x, i, u: np.full(x.shape[0], float(u)),
    )
    grid = sg.build_grid(spec, (-2.0, 2.0), 21, 2)
    phi = np.zeros(grid.shape)
    val, u = hamiltonian(spec, grid, phi, (5,), 1)
    assert val == 1.0 and u == 1


def test_switch_obstacle_single_candidate():
    bench = sg.get_benchmark("timed_switch")
    # values (5, 3), cost 0.1: candidate is 3 - 0.1
    val, target = switch_obstacle([5.0, 3.0], np.array([0.0]), 1, bench.spec)
    assert val == pytest.approx(2.9)
    assert target == 2


def test_switch_obstacle_single_regime_sentinel():
    bench = sg.get_benchmark("pure_diffusion_quadratic")
    val, target = switch_obstacle([1.0], np.array([0.0]), 1, bench.spec)
    assert val == float("-inf") and target is None


def test_switch_obstacle_tie_breaks_to_lowest_index():
    bench = sg.get_benchmark("ek_example")
    spec = replace(
        bench.spec,
        regimes=3,
        switch_cost=lambda x, i, j: (
            np.zeros(x.shape[0]) if i == j else np.ones(x.shape[0])
        ),
    )
    val, target = switch_obstacle([0.0, 4.0, 4.0], np.array([0.0]), 1, spec)
    assert val == pytest.approx(3.0)
    assert target == 2


def test_step_with_prohibitive_costs_is_uncoupled():
    rng = np.random.default_rng(9)
    base = make_two_regime_spec(rng)
    big = replace(
        base,
        switch_cost=lambda x, i, j: (
            np.zeros(x.shape[0]) if i == j else np.full(x.shape[0], 1e9)
        ),
    )
    grid = sg.build_grid(big, (-1.0, 1.0), 21, 10)
    layer = np.stack([grid.axes[0], np.cos(grid.axes[0])])
    stepped_big, pol = sg.step_backward(big, grid, layer)
    # single-regime steps computed independently must coincide
    single = replace(base, regimes=1, switch_cost=lambda x, i, j: np.zeros(x.shape[0]))
    for i in (1, 2):
        one = replace(
            single,
            drift=lambda x, _i, u, i=i: base.drift(x, i, u),
            diffusion=lambda x, _i, u, i=i: base.diffusion(x, i, u),
            running_cost=lambda x, _i, u, i=i: base.running_cost(x, i, u),
        )
        stepped_one, _ = sg.step_backward(one, grid, layer[i - 1][None])
        assert np.array_equal(stepped_big[i - 1], stepped_one[0])
    assert np.all(pol.switch_to == 0)


def test_step_small_cost_inactive_obstacle():
    bench = sg.get_benchmark("no_dynamics")
    spec = replace(
        bench.spec,
        terminal_payoff=lambda x, i: np.zeros(x.shape[0]),
        switch_cost=lambda x, i, j: (
            np.zeros(x.shape[0]) if i == j else np.full(x.shape[0], 0.1)
        ),
    )
    grid = sg.build_grid(spec, (-2.0, 2.0), 21, 4)
    layer = np.zeros((2,) + grid.shape)
    stepped, pol = sg.step_backward(spec, grid, layer)
    assert np.array_equal(stepped, layer)
    assert np.all(pol.switch_to == 0)


def test_step_projects_onto_the_profitable_switch():
    bench = sg.get_benchmark("timed_switch")
    spec = bench.spec
    grid = sg.build_grid(spec, (-1.0, 1.0), 21, 20)  # dt = 0.05
    dt = grid.dt
    remaining_next = 0.2 - dt  # regime-2 value one layer before t = T - 0.2
    layer = np.stack([
        np.zeros(grid.shape),
        np.full(grid.shape, remaining_next),
    ])
    stepped, pol = sg.step_backward(spec, grid, layer)
    # regime 2 accrues the unit reward; regime 1 projects from 0 up to 0.1
    assert np.allclose(stepped[1], 0.2, atol=1e-14)
    assert np.allclose(stepped[0], 0.1, atol=1e-14)
    assert np.all(pol.switch_to[0] == 2)
    assert np.all(pol.switch_to[1] == 0)


def test_step_rejects_non_finite_layers():
    bench = sg.get_benchmark("timed_switch")
    grid = sg.build_grid(bench.spec, (-1.0, 1.0), 21, 20)
    layer = np.zeros((2,) + grid.shape)
    layer[0, 3] = np.nan
    with pytest.raises(ValueError):
        sg.step_backward(bench.spec, grid, layer)
