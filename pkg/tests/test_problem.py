"""Assumption checks, zero-cost loop detection, and the growth envelope."""

import itertools

import numpy as np
import pytest

import switchgame as sg
from switchgame.problem import no_free_loop, validate_spec, growth_envelope

from conftest import make_two_regime_spec


def brute_force_zero_cycles(mat):
    """Independent oracle: enumerate every simple cycle over zero-cost edges."""
    m = mat.shape[0]
    zero = (mat == 0) & ~np.eye(m, dtype=bool)
    found = []
    for length in range(2, m + 1):
        for nodes in itertools.permutations(range(m), length):
            closed = list(nodes) + [nodes[0]]
            if all(zero[a, b] for a, b in zip(closed, closed[1:])):
                found.append([v + 1 for v in closed])
    return found


def test_no_free_loop_positive_costs_pass():
    mat = np.array([[0.0, 1.0], [1.0, 0.0]])
    ok, witness = no_free_loop(mat)
    assert ok and witness is None


def test_no_free_loop_all_zero_two_regimes():
    ok, witness = no_free_loop(np.zeros((2, 2)))
    assert not ok
    assert witness == [1, 2, 1]


def test_no_free_loop_three_cycle_matches_brute_force():
    mat = np.ones((3, 3))
    np.fill_diagonal(mat, 0.0)
    mat[0, 1] = mat[1, 2] = mat[2, 0] = 0.0
    ok, witness = no_free_loop(mat)
    assert not ok
    assert witness == [1, 2, 3, 1]
    cycles = brute_force_zero_cycles(mat)
    assert witness in cycles
    # the returned cycle is the shortest one the oracle finds
    assert len(witness) == min(len(c) for c in cycles)


def test_no_free_loop_shortest_beats_longer():
    # both a 2-cycle (2<->3) and a 3-cycle exist; the 2-cycle must win
    mat = np.ones((3, 3))
    np.fill_diagonal(mat, 0.0)
    mat[1, 2] = mat[2, 1] = 0.0
    mat[0, 1] = mat[2, 0] = 0.0
    ok, witness = no_free_loop(mat)
    assert not ok
    assert witness == [2, 3, 2]


def test_no_free_loop_rejects_bad_matrices():
    with pytest.raises(ValueError):
        no_free_loop(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        no_free_loop(np.array([[0.5, 1.0], [1.0, 0.0]]))


def test_no_free_loop_monotone_under_cost_increase():
    rng = np.random.default_rng(7)
    for _ in range(25):
        m = int(rng.integers(2, 6))
        mat = rng.uniform(0.0, 1.0, size=(m, m))
        # zero edges only above the diagonal: acyclic, hence passing
        for i in range(m):
            for j in range(m):
                if i < j and rng.random() < 0.5:
                    mat[i, j] = 0.0
        np.fill_diagonal(mat, 0.0)
        ok, _ = no_free_loop(mat)
        assert ok
        i, j = rng.integers(0, m, size=2)
        if i != j:
            bumped = mat.copy()
            bumped[i, j] += rng.uniform(0.1, 1.0)
            ok2, _ = no_free_loop(bumped)
            assert ok2


def test_validate_spec_flags_only_the_zero_cost_loop_on_ek():
    bench = sg.get_benchmark("ek_example")
    report = validate_spec(bench.spec, np.linspace(-2, 2, 21)[:, None])
    failures = report.failures()
    assert len(failures) == 1
    assert failures[0].name == "no_free_loop"
    point, cycle = failures[0].witness
    assert cycle == [1, 2, 1]
    # drift is constant in x, so the sampled Lipschitz ratio vanishes
    assert report.lipschitz == 0.0


def test_validate_spec_passes_with_positive_costs():
    rng = np.random.default_rng(3)
    spec = make_two_regime_spec(rng)
    report = validate_spec(spec, np.linspace(-1, 1, 15)[:, None])
    assert report.all_passed()


def test_validate_spec_rejects_empty_samples():
    bench = sg.get_benchmark("ek_example")
    with pytest.raises(ValueError):
        validate_spec(bench.spec, np.zeros((0, 1)))


def test_validate_spec_terminal_consistency_failure_detected():
    bench = sg.get_benchmark("no_dynamics")
    spec = bench.spec

    def bad_cost(x, i, j):
        return np.zeros(x.shape[0]) if i == j else np.full(x.shape[0], 0.01)

    from dataclasses import replace

    bad = replace(spec, switch_cost=bad_cost)
    report = validate_spec(bad, np.linspace(-2, 2, 9)[:, None])
    assert not report.passed("terminal_no_switch_gain")


def test_growth_envelope_on_ek_sits_below_the_value():
    bench = sg.get_benchmark("ek_example")
    samples = np.linspace(-2, 2, 41)[:, None]
    report = validate_spec(bench.spec, samples)
    env = growth_envelope(bench.spec, report)
    assert env.envelope_exp == 4.0  # max(4, p) with p = 1
    assert env.rate * env.scale >= env.composite - 1e-12
    # the envelope lies below the exact value x - (T - s) on the samples
    for s in (0.0, 0.5, 1.0):
        exact = samples[:, 0] - (bench.spec.horizon - s)
        assert np.all(env.envelope(s, samples) <= exact + 1e-12)
    # terminal subsolution: below the payoff itself at s = T
    assert np.all(env.envelope(1.0, samples) <= samples[:, 0] + 1e-12)


def test_growth_envelope_quadratic_payoff_keeps_exponent_four():
    bench = sg.get_benchmark("pure_diffusion_quadratic")
    samples = np.linspace(-6, 6, 25)[:, None]
    report = validate_spec(bench.spec, samples)
    env = growth_envelope(bench.spec, report)
    assert bench.spec.growth_exp == 2.0
    assert env.envelope_exp == 4.0


def test_growth_envelope_zero_data_allows_any_positive_scale():
    bench = sg.get_benchmark("ek_example")
    from dataclasses import replace

    zero = lambda x, *a: np.zeros(x.shape[0])
    spec = replace(
        bench.spec,
        running_cost=zero,
        terminal_payoff=lambda x, i: np.zeros(x.shape[0]),
        switch_cost=lambda x, i, j: np.zeros(x.shape[0]),
    )
    report = validate_spec(spec, np.linspace(-2, 2, 9)[:, None])
    env = growth_envelope(spec, report)
    assert env.scale > 0
    assert np.all(env.envelope(0.0, np.array([[0.0]])) <= 0.0)


def test_growth_envelope_rejects_non_finite_samples():
    bench = sg.get_benchmark("ek_example")
    from dataclasses import replace

    spec = replace(
        bench.spec,
        terminal_payoff=lambda x, i: np.where(x[:, 0] > 1.5, np.inf, x[:, 0]),
    )
    report = validate_spec(spec, np.linspace(-2, 2, 9)[:, None])
    with pytest.raises(sg.EstimationError):
        growth_envelope(spec, report)


def test_cost_matrix_round_trip():
    rng = np.random.default_rng(11)
    spec = make_two_regime_spec(rng)
    mat = spec.cost_matrix(np.array([0.3]))
    assert mat.shape == (2, 2)
    assert mat[0, 0] == mat[1, 1] == 0.0
    assert np.all(mat[~np.eye(2, dtype=bool)] >= 0.2)
