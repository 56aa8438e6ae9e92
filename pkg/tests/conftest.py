"""Shared fixtures: solved benchmark fields and random spec factories."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

import switchgame as sg
from switchgame.problem import ProblemSpec


def solve_benchmark(name):
    bench = sg.get_benchmark(name)
    grid = sg.build_grid(bench.spec, bench.bounds, bench.nx, bench.nt_hint)
    field, policy = sg.solve(bench.spec, grid)
    return SimpleNamespace(bench=bench, spec=bench.spec, grid=grid,
                           field=field, policy=policy)


@pytest.fixture(scope="session")
def ek():
    return solve_benchmark("ek_example")


@pytest.fixture(scope="session")
def timed():
    return solve_benchmark("timed_switch")


@pytest.fixture(scope="session")
def diffusion():
    return solve_benchmark("pure_diffusion_quadratic")


@pytest.fixture(scope="session")
def frozen():
    return solve_benchmark("no_dynamics")


@pytest.fixture(scope="session")
def all_solved(ek, timed, diffusion, frozen):
    return [ek, timed, diffusion, frozen]


def make_two_regime_spec(rng, name="random", payoff_shift=None, payoff_bump=None):
    """Random two-regime instance with constant-in-x dynamics.

    Terminal payoff is regime-independent and smooth; the off-diagonal
    switching costs sit in [0.2, 0.5], so adding a payoff bump with
    oscillation below 0.05 preserves the terminal consistency margin.
    """
    m, nu = 2, 2
    b_const = rng.uniform(-1.0, 1.0, size=(m, nu))
    s_const = rng.uniform(0.0, 0.7, size=(m, nu))
    f_const = rng.uniform(-0.5, 0.5, size=(m, nu))
    c_off = rng.uniform(0.2, 0.5, size=(m, m))
    np.fill_diagonal(c_off, 0.0)
    amp = rng.uniform(0.2, 1.0)
    bump_scale = rng.uniform(0.0, 1.0, size=m)
    omega = rng.uniform(1.0, 3.0)
    phase = rng.uniform(0.0, 2 * np.pi)

    def drift(x, i, u):
        return np.full((x.shape[0], 1), b_const[i - 1, int(u)])

    def diffusion_fn(x, i, u):
        return np.full((x.shape[0], 1, 1), s_const[i - 1, int(u)])

    def running(x, i, u):
        return np.full(x.shape[0], f_const[i - 1, int(u)])

    def payoff(x, i):
        g = amp * np.tanh(x[:, 0])
        if payoff_bump is not None:
            g = g + payoff_bump * bump_scale[i - 1] * 0.5 * (
                1.0 + np.sin(omega * x[:, 0] + phase)
            )
        if payoff_shift is not None:
            g = g + payoff_shift
        return g

    def cost(x, i, j):
        return np.full(x.shape[0], c_off[i - 1, j - 1])

    return ProblemSpec(
        name=name,
        dimension=1,
        horizon=0.25,
        regimes=m,
        control_set=(0, 1),
        drift=drift,
        diffusion=diffusion_fn,
        running_cost=running,
        terminal_payoff=payoff,
        switch_cost=cost,
    )


def small_grid(spec):
    return sg.build_grid(spec, (-1.0, 1.0), 41, 10)
