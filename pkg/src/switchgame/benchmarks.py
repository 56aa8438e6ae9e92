"""Built-in problem instances with closed-form or enumerable reference values.

Every acceptance and regression test anchors to one of these.  Each entry
carries its default grid, the interior window on which accuracy is measured,
Monte Carlo defaults, and (when available) the exact value function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import MissingAnalyticError, UnknownBenchmarkError
from .problem import ProblemSpec

__all__ = [
    "Benchmark",
    "get_benchmark",
    "benchmark_names",
    "analytic_value",
    "one_shot_switch_oracle",
]


@dataclass(frozen=True)
class Benchmark:
    """One registered instance plus everything its verification run needs."""

    name: str
    spec: ProblemSpec
    bounds: tuple
    nx: int
    nt_hint: int
    interior: tuple              # window for accuracy checks
    tolerance: float             # accuracy target on the interior window
    provenance: str
    assumption_profile: dict     # expected verdict per assumption check
    analytic: Optional[Callable] = None        # (s, x, i) -> value
    analytic_upper: Optional[Callable] = None  # regime-observing upper value
    mc_paths: int = 4000
    mc_dt: float = 1.0 / 256.0
    mc_knots: int = 4
    strategy_factory: Optional[Callable] = None  # attached scripted strategy

    def default_x0(self) -> float:
        return 0.5 * (self.bounds[0] + self.bounds[1])


def _zero_matrix(n):
    return np.zeros((n, 1, 1))


def _ek_spec() -> ProblemSpec:
    """Two regimes, zero switching costs, adversary can mirror the regime.

    The drift -|i - u| vanishes when the control matches the regime and is
    -1 otherwise, so an adversary observing only the state path keeps the
    drift at -1 (value x - (T - s)), while one that must commit a step
    control first can be matched and neutralised (upper value x).
    """

    def drift(x, i, u):
        return np.full((x.shape[0], 1), -abs(i - u), dtype=float)

    def diffusion(x, i, u):
        return _zero_matrix(x.shape[0])

    def running(x, i, u):
        return np.zeros(x.shape[0])

    def payoff(x, i):
        return np.array(x[:, 0], dtype=float)

    def cost(x, i, j):
        return np.zeros(x.shape[0])

    return ProblemSpec(
        name="ek_example",
        dimension=1,
        horizon=1.0,
        regimes=2,
        control_set=(1, 2),
        drift=drift,
        diffusion=diffusion,
        running_cost=running,
        terminal_payoff=payoff,
        switch_cost=cost,
        growth_exp=1.0,
        allow_zero_cost_loops=True,
    )


def _no_dynamics_spec() -> ProblemSpec:
    """Frozen state, pure payoff comparison; the value equals the payoff."""

    def drift(x, i, u):
        return np.zeros_like(x)

    def diffusion(x, i, u):
        return _zero_matrix(x.shape[0])

    def running(x, i, u):
        return np.zeros(x.shape[0])

    def payoff(x, i):
        return x[:, 0] if i == 1 else 0.5 * x[:, 0]

    def cost(x, i, j):
        return np.zeros(x.shape[0]) if i == j else np.ones(x.shape[0])

    return ProblemSpec(
        name="no_dynamics",
        dimension=1,
        horizon=1.0,
        regimes=2,
        control_set=(0.0,),
        drift=drift,
        diffusion=diffusion,
        running_cost=running,
        terminal_payoff=payoff,
        switch_cost=cost,
    )


def _pure_diffusion_spec() -> ProblemSpec:
    """Standard Brownian motion with quadratic payoff: value x**2 + (T - s)."""

    def drift(x, i, u):
        return np.zeros_like(x)

    def diffusion(x, i, u):
        return np.ones((x.shape[0], 1, 1))

    def running(x, i, u):
        return np.zeros(x.shape[0])

    def payoff(x, i):
        return x[:, 0] ** 2

    def cost(x, i, j):
        return np.zeros(x.shape[0])

    return ProblemSpec(
        name="pure_diffusion_quadratic",
        dimension=1,
        horizon=1.0,
        regimes=1,
        control_set=(0.0,),
        drift=drift,
        diffusion=diffusion,
        running_cost=running,
        terminal_payoff=payoff,
        switch_cost=cost,
        growth_exp=2.0,
    )


def _timed_switch_spec() -> ProblemSpec:
    """Pay 0.1 to enter the regime that earns reward at unit rate.

    Regime 2 collects the full remaining time; regime 1 should switch
    immediately while more than the fee remains, giving
    max(0, (T - s) - 0.1).
    """

    def drift(x, i, u):
        return np.zeros_like(x)

    def diffusion(x, i, u):
        return _zero_matrix(x.shape[0])

    def running(x, i, u):
        return np.zeros(x.shape[0]) if i == 1 else np.ones(x.shape[0])

    def payoff(x, i):
        return np.zeros(x.shape[0])

    def cost(x, i, j):
        return np.zeros(x.shape[0]) if i == j else np.full(x.shape[0], 0.1)

    return ProblemSpec(
        name="timed_switch",
        dimension=1,
        horizon=1.0,
        regimes=2,
        control_set=(0.0,),
        drift=drift,
        diffusion=diffusion,
        running_cost=running,
        terminal_payoff=payoff,
        switch_cost=cost,
    )


def one_shot_switch_oracle(s: float, horizon: float, fee: float = 0.1,
                           step: float = 1e-3):
    """Brute-force reference for the timed-switch instance.

    Enumerates a single switch time on a uniform grid and compares against
    never switching.  Returns the pair of optimal payoffs (regime 1, regime 2).
    """
    taus = np.arange(s, horizon + step / 2, step)
    from_1 = max(0.0, float(np.max((horizon - taus) - fee)))
    from_2 = max(float(horizon - s), float(np.max((taus - s) - fee)))
    return from_1, from_2


_PASS_ALL = {
    "drift_diffusion_lipschitz": True,
    "drift_diffusion_linear_growth": True,
    "switch_cost_nonnegative": True,
    "switch_cost_zero_diagonal": True,
    "reward_polynomial_growth": True,
    "terminal_no_switch_gain": True,
    "no_free_loop": True,
}


def _registry():
    entries = {}

    spec = _ek_spec()
    entries["ek_example"] = Benchmark(
        name="ek_example",
        spec=spec,
        bounds=(-2.0, 2.0),
        nx=401,
        nt_hint=400,
        interior=(-1.5, 1.5),
        tolerance=2e-2,
        provenance="closed form of the regime-mirroring adversarial race",
        assumption_profile={**_PASS_ALL, "no_free_loop": False},
        analytic=lambda s, x, i: x - (spec.horizon - s),
        analytic_upper=lambda s, x, i: x,
        mc_paths=1,
    )

    spec = _no_dynamics_spec()
    entries["no_dynamics"] = Benchmark(
        name="no_dynamics",
        spec=spec,
        bounds=(-2.0, 2.0),
        nx=201,
        nt_hint=20,
        interior=(-1.5, 1.5),
        tolerance=1e-10,
        provenance="value equals the terminal payoff when nothing moves",
        assumption_profile=dict(_PASS_ALL),
        analytic=lambda s, x, i: x if i == 1 else 0.5 * x,
        mc_paths=1,
    )

    spec = _pure_diffusion_spec()
    entries["pure_diffusion_quadratic"] = Benchmark(
        name="pure_diffusion_quadratic",
        spec=spec,
        bounds=(-6.0, 6.0),
        nx=241,
        nt_hint=400,
        interior=(-2.0, 2.0),
        tolerance=1e-2,
        provenance="second-moment identity of Brownian motion",
        assumption_profile=dict(_PASS_ALL),
        analytic=lambda s, x, i: x ** 2 + (spec.horizon - s),
        mc_paths=20000,
        mc_dt=1.0 / 64.0,
        mc_knots=1,
    )

    spec = _timed_switch_spec()
    entries["timed_switch"] = Benchmark(
        name="timed_switch",
        spec=spec,
        bounds=(-1.0, 1.0),
        nx=21,
        nt_hint=200,
        interior=(-1.0, 1.0),
        tolerance=1e-2,
        provenance="one-shot switch-time enumeration",
        assumption_profile=dict(_PASS_ALL),
        analytic=lambda s, x, i: (
            max(0.0, (spec.horizon - s) - 0.1) if i == 1 else spec.horizon - s
        ),
        mc_paths=1,
        mc_knots=1,
    )

    ek = entries["ek_example"]
    entries["zeno_pathology"] = Benchmark(
        name="zeno_pathology",
        spec=ek.spec,
        bounds=ek.bounds,
        nx=ek.nx,
        nt_hint=ek.nt_hint,
        interior=ek.interior,
        tolerance=ek.tolerance,
        provenance="alternation schedule accumulating before time one half",
        assumption_profile=ek.assumption_profile,
        analytic=ek.analytic,
        analytic_upper=ek.analytic_upper,
        mc_paths=1,
        strategy_factory=lambda: _zeno_strategy(),
    )
    return entries


def _zeno_strategy():
    from .simulate import FeedbackSwitchingStrategy

    return FeedbackSwitchingStrategy.zeno_alternation()


_REGISTRY = _registry()


def benchmark_names():
    return sorted(_REGISTRY)


def get_benchmark(name: str) -> Benchmark:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownBenchmarkError(
            f"unknown benchmark {name!r}; registered: {', '.join(benchmark_names())}"
        ) from None


def analytic_value(benchmark: Benchmark, s: float, x: float, i: int) -> float:
    """Exact reference value; raises when the benchmark has none."""
    if benchmark.analytic is None:
        raise MissingAnalyticError(f"benchmark {benchmark.name!r} has no closed form")
    benchmark.spec.check_regime(i)
    return float(benchmark.analytic(s, x, i))
