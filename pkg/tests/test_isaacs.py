"""Lower/upper game Hamiltonians and the max-min vs min-max comparison."""

from dataclasses import replace

import numpy as np
import pytest

import switchgame as sg
from switchgame.isaacs import (
    isaacs_check,
    lower_isaacs_hamiltonian,
    solve_isaacs,
    upper_isaacs_hamiltonian,
)


@pytest.fixture(scope="module")
def ek_setup():
    bench = sg.get_benchmark("ek_example")
    grid = sg.build_grid(bench.spec, (-2.0, 2.0), 41, 40)
    return bench.spec, grid


@pytest.mark.parametrize(
    "slope,expected",
    [(1.0, -1.0), (0.0, 0.0), (-1.0, 0.0)],
)
def test_lower_hamiltonian_enumeration(ek_setup, slope, expected):
    spec, grid = ek_setup
    w = slope * grid.axes[0]
    assert lower_isaacs_hamiltonian(spec, grid, w, (9,)) == pytest.approx(
        expected, abs=1e-13
    )


@pytest.mark.parametrize(
    "slope,expected",
    [(1.0, 0.0), (0.0, 0.0), (-1.0, 1.0)],
)
def test_upper_hamiltonian_enumeration(ek_setup, slope, expected):
    spec, grid = ek_setup
    w = slope * grid.axes[0]
    assert upper_isaacs_hamiltonian(spec, grid, w, (9,)) == pytest.approx(
        expected, abs=1e-13
    )


def test_hamiltonians_reject_boundary_nodes(ek_setup):
    spec, grid = ek_setup
    w = grid.axes[0].copy()
    with pytest.raises(ValueError):
        lower_isaacs_hamiltonian(spec, grid, w, (0,))


def test_lower_game_recovers_the_feedback_value(ek):
    field = solve_isaacs(ek.spec, ek.grid, sg.LOWER)
    x = ek.grid.axes[0]
    w = np.abs(x) <= 1.5
    assert np.max(np.abs(field.values[0, 0][w] - (x[w] - 1.0))) <= 2e-2
    assert field.label == "V_FS"


def test_upper_game_recovers_the_control_matching_value(ek):
    field = solve_isaacs(ek.spec, ek.grid, sg.UPPER)
    x = ek.grid.axes[0]
    w = np.abs(x) <= 1.5
    assert np.max(np.abs(field.values[0, 0][w] - x[w])) <= 2e-2
    assert field.label == "U_FS"


def test_constant_payoff_stays_constant(ek_setup):
    spec, grid = ek_setup
    flat = replace(spec, terminal_payoff=lambda x, i: np.full(x.shape[0], 0.75))
    for side in (sg.LOWER, sg.UPPER):
        field = solve_isaacs(flat, grid, side)
        assert np.max(np.abs(field.values - 0.75)) <= 1e-12


def test_lower_field_never_exceeds_upper(ek):
    low = solve_isaacs(ek.spec, ek.grid, sg.LOWER)
    up = solve_isaacs(ek.spec, ek.grid, sg.UPPER)
    assert np.all(low.values <= up.values + 1e-10)


def test_isaacs_gap_is_the_absolute_slope(ek_setup):
    spec, _ = ek_setup
    p = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    report = isaacs_check(spec, p)
    assert np.array_equal(report.gap, np.abs(p))
    assert not report.holds
    assert report.max_gap == 2.0
    assert np.all(report.lower <= report.upper + 1e-12)


def test_isaacs_zero_slope_has_no_gap(ek_setup):
    spec, _ = ek_setup
    report = isaacs_check(spec, [0.0])
    assert report.gap[0] == 0.0


def test_regime_independent_drift_satisfies_the_interchange(ek_setup):
    spec, _ = ek_setup
    flat = replace(
        spec, drift=lambda x, i, u: np.full((x.shape[0], 1), -float(u))
    )
    report = isaacs_check(flat, np.linspace(-2, 2, 17))
    assert report.holds
    assert report.max_gap <= 1e-12


def test_weak_duality_on_random_drifts():
    bench = sg.get_benchmark("ek_example")
    rng = np.random.default_rng(21)
    for _ in range(10):
        table = rng.uniform(-2, 2, size=(2, 2))
        spec = replace(
            bench.spec,
            drift=lambda x, i, u, t=table: np.full((x.shape[0], 1), t[i - 1, int(u) - 1]),
        )
        report = isaacs_check(spec, rng.uniform(-3, 3, size=7))
        assert np.all(report.lower <= report.upper + 1e-12)


def test_isaacs_check_rejects_empty_samples(ek_setup):
    spec, _ = ek_setup
    with pytest.raises(ValueError):
        isaacs_check(spec, [])
