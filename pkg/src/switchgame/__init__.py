"""Worst-case optimal switching control: solver, simulator, and checks.

The package solves the coupled obstacle system of a switching game between a
feedback switcher and an adversarial control, extracts feedback strategies
and pointwise best responses, and verifies them by Monte Carlo simulation
against closed-form benchmarks.
"""

from .benchmarks import Benchmark, analytic_value, benchmark_names, get_benchmark
from .errors import (
    ConfigurationError,
    EstimationError,
    MissingAnalyticError,
    NoFreeLoopError,
    NumericalBlowupError,
    SwitchGameError,
    UnknownBenchmarkError,
    ZenoAbortError,
)
from .grid import Grid, build_grid
from .hjb import (
    PolicyField,
    ResidualStats,
    ValueField,
    generator_apply,
    hamiltonian,
    obstacle_violation,
    residual_check,
    solve,
    step_backward,
    switch_obstacle,
    terminal_error,
)
from .isaacs import (
    LOWER,
    UPPER,
    IsaacsReport,
    isaacs_check,
    lower_isaacs_hamiltonian,
    solve_isaacs,
    upper_isaacs_hamiltonian,
)
from .problem import (
    GrowthBounds,
    ProblemSpec,
    ValidationReport,
    growth_envelope,
    no_free_loop,
    validate_spec,
)
from .simulate import (
    AdversaryControl,
    FeedbackSwitchingStrategy,
    McEstimate,
    SandwichReport,
    ScriptedSwitch,
    SwitchEvent,
    TrajectoryRecord,
    best_response_adversary,
    dpp_check,
    estimate_J,
    sandwich_check,
    simulate_path,
    worst_case_over_step_controls,
    zeno_alternation_times,
)

__version__ = "0.1.0"
