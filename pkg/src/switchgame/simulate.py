"""Path simulation of the switched dynamics and Monte Carlo payoff estimates.

Within each time step the order of play is: the switcher applies its rule at
the current state (possibly chaining several instantaneous regime changes,
each paying its cost), the adversary then picks a control seeing the
post-switch regime, and finally the state diffuses by one Euler-Maruyama
increment.  Gaussian increments come from a per-path stream derived from
``(seed, path index)``, so batched, chunked, and single-path runs produce
bit-identical results.

Paths that exceed their switch cap are aborted: unbounded alternation can
accumulate infinitely many switches before the horizon, and the cap is the
simulator's guard against that behaviour.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigurationError,
    EstimationError,
    NumericalBlowupError,
    ZenoAbortError,
)
from .grid import Grid
from .hjb import STAY, PolicyField, SchemeOperators, ValueField, _march
from .problem import ProblemSpec

__all__ = [
    "SwitchEvent",
    "ScriptedSwitch",
    "FeedbackSwitchingStrategy",
    "AdversaryControl",
    "TrajectoryRecord",
    "McEstimate",
    "SandwichReport",
    "simulate_path",
    "estimate_J",
    "best_response_adversary",
    "worst_case_over_step_controls",
    "dpp_check",
    "sandwich_check",
    "zeno_alternation_times",
]


@dataclass(frozen=True)
class SwitchEvent:
    time: float
    source: int
    target: int
    cost: float


@dataclass(frozen=True)
class ScriptedSwitch:
    """One scheduled regime change: fires at the first step time >= ``time``.

    ``target`` is a 1-based regime or a callable ``(t, X, I) -> targets``
    evaluated on the batch (e.g. alternation rules that depend on the
    current regime).
    """

    time: float
    target: object


@dataclass(eq=False)
class FeedbackSwitchingStrategy:
    """Runtime switching rule driven by observations of ``(t, X, I)`` only.

    ``value`` mode follows the recorded solver policy at the nearest grid
    node, so a switch fires exactly where the obstacle strictly improved the
    continuation value.  ``scripted`` mode replays an explicit stopping-rule
    list, which is how the pathological alternation schedules and the
    control-matching test strategies are expressed.
    """

    mode: str
    value_field: Optional[ValueField] = None
    policy: Optional[PolicyField] = None
    trigger_tolerance: float = 1e-9
    zeno_cap: Optional[int] = None
    script: tuple = ()

    def __post_init__(self):
        if self.mode not in ("value", "scripted"):
            raise ValueError("mode must be 'value' or 'scripted'")
        if self.mode == "value" and (self.value_field is None or self.policy is None):
            raise ValueError("value mode needs a value field and a policy")
        times = [sw.time for sw in self.script]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("scripted switch times must be nondecreasing")

    @classmethod
    def value_driven(cls, value_field: ValueField, policy: PolicyField, **kw):
        return cls(mode="value", value_field=value_field, policy=policy, **kw)

    @classmethod
    def never_switch(cls, **kw):
        return cls(mode="scripted", script=(), **kw)

    @classmethod
    def scripted(cls, switches, **kw):
        return cls(mode="scripted", script=tuple(switches), **kw)

    @classmethod
    def zeno_alternation(cls, count: int = 64, **kw):
        """Alternating two-regime schedule accumulating before time one half."""
        script = tuple(
            ScriptedSwitch(time=t, target=lambda t_, X, I: 3 - I)
            for t in zeno_alternation_times(count)
        )
        return cls(mode="scripted", script=script, **kw)

    @classmethod
    def match_step_control(cls, adversary: "AdversaryControl", **kw):
        """Switch to the adversary's step value at each of its knots.

        Only meaningful when control points are regime labels; keeping the
        regime equal to the control freezes drifts of the form -|i - u|.
        """
        if adversary.kind != "step":
            raise ValueError("can only match a step adversary")
        switches = [
            ScriptedSwitch(time=t, target=int(v))
            for t, v in zip(adversary.knot_starts, adversary.knot_values)
        ]
        return cls(mode="scripted", script=tuple(switches), **kw)


def zeno_alternation_times(count: int) -> np.ndarray:
    """The strictly increasing schedule (2**(n+1) - 1) / 2**(n+2) -> 1/2."""
    n = np.arange(count)
    return (2.0 ** (n + 1) - 1.0) / 2.0 ** (n + 2)


class AdversaryControl:
    """Nature's control rule; queried with the post-switch regime.

    Variants: a constant control point, a deterministic step control on time
    knots, a feedback function of ``(t, X, I)``, or the pointwise best
    response recorded by the solver (nearest-node lookup, out-of-domain
    queries clamped and counted).
    """

    def __init__(self, kind, *, index=None, knot_starts=None, knot_index=None,
                 knot_values=None, fn=None, policy=None):
        self.kind = kind
        self.index = index
        self.knot_starts = knot_starts
        self.knot_index = knot_index
        self.knot_values = knot_values
        self.fn = fn
        self.policy = policy
        self.clamp_count = 0

    @classmethod
    def constant(cls, spec: ProblemSpec, u):
        return cls("constant", index=_control_index(spec, u))

    @classmethod
    def step(cls, spec: ProblemSpec, knots, values):
        """Step control: value ``values[k]`` on ``[knots[k], knots[k+1])``.

        ``knots`` are the interval start times (nondecreasing); the final
        interval extends to the horizon.
        """
        starts = np.asarray(knots, dtype=float)
        if starts.ndim != 1 or starts.size == 0 or starts.size != len(values):
            raise ValueError("need one control value per knot")
        if np.any(np.diff(starts) < 0):
            raise ValueError("knots must be nondecreasing")
        idx = np.array([_control_index(spec, v) for v in values], dtype=np.int64)
        return cls("step", knot_starts=starts, knot_index=idx,
                   knot_values=tuple(values))

    @classmethod
    def feedback(cls, fn: Callable):
        """``fn(t, X, I) -> control values`` (vectorised over the batch)."""
        return cls("feedback", fn=fn)

    @classmethod
    def best_response(cls, policy: PolicyField):
        return cls("best_response", policy=policy)

    def indices_at(self, t, X, I, spec: ProblemSpec, clamp) -> np.ndarray:
        n = X.shape[0]
        if self.kind == "constant":
            return np.full(n, self.index, dtype=np.int64)
        if self.kind == "step":
            pos = int(np.searchsorted(self.knot_starts, t, side="right")) - 1
            pos = min(max(pos, 0), len(self.knot_index) - 1)
            return np.full(n, self.knot_index[pos], dtype=np.int64)
        if self.kind == "feedback":
            vals = np.asarray(self.fn(t, X, I))
            if vals.shape == ():
                vals = np.full(n, vals)
            return _control_indices(spec, vals)
        # best response: nearest node in time then space, ties to lower index
        grid = self.policy.grid
        k = grid.nearest_time_index(t)
        flat = grid.nearest_spatial_index(X, clamp)
        layer = self.policy.control_index[k].reshape(spec.regimes, -1)
        return layer[I - 1, flat].astype(np.int64)


def best_response_adversary(policy: PolicyField) -> AdversaryControl:
    """Feedback adversary replaying the recorded pointwise argmin controls."""
    return AdversaryControl.best_response(policy)


def _control_index(spec: ProblemSpec, u) -> int:
    for k, v in enumerate(spec.control_set):
        if v == u:
            return k
    raise ValueError(f"control {u!r} is not in the control set {spec.control_set}")


def _control_indices(spec: ProblemSpec, values) -> np.ndarray:
    ctrl = np.asarray(spec.control_set, dtype=float)
    order = np.argsort(ctrl, kind="stable")
    pos = np.searchsorted(ctrl[order], values)
    pos = np.clip(pos, 0, len(ctrl) - 1)
    idx = order[pos]
    if not np.allclose(ctrl[idx], values, rtol=0.0, atol=0.0, equal_nan=False):
        bad = values[ctrl[idx] != values]
        raise ValueError(f"feedback control {bad[:1]} is not in the control set")
    return idx.astype(np.int64)


@dataclass(eq=False)
class TrajectoryRecord:
    """One simulated path with its switch events and payoff decomposition."""

    times: np.ndarray
    states: np.ndarray
    regimes: np.ndarray
    controls: tuple
    cum_running: np.ndarray
    cum_switch: np.ndarray
    switches: tuple
    running_reward: float
    switch_cost_total: float
    terminal_value: float
    payoff: float
    seed: int
    path_index: int

    def recomputed_payoff(self) -> float:
        return self.running_reward + self.terminal_value - self.switch_cost_total


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error; deterministic given the seed."""

    mean: float
    stderr: float
    n_paths: int
    seed: int
    zeno_failures: int = 0

    def __str__(self):
        return (
            f"mean={self.mean:.17g} stderr={self.stderr:.17g} "
            f"n={self.n_paths} seed={self.seed}"
        )


@dataclass(frozen=True)
class SandwichReport:
    """Achievable lower proxy for the extracted strategy vs the grid value."""

    lower_proxy: float
    grid_value: float
    stderr: float
    tolerance: float
    passed: bool
    worst_control_values: tuple


def _time_grid(s: float, horizon: float, dt_sim: float) -> np.ndarray:
    if dt_sim <= 0:
        raise ValueError("dt_sim must be positive")
    span = horizon - s
    if span < 0:
        raise ValueError("start time past the horizon")
    if span == 0:
        return np.array([s])
    n = max(1, int(math.ceil(span / dt_sim - 1e-12)))
    t = s + dt_sim * np.arange(n + 1)
    t[-1] = horizon
    return t


def _path_normals(seed: int, path_index: int, nsteps: int, d: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(int(path_index),))
    return np.random.default_rng(ss).standard_normal((nsteps, d))


class _Batch:
    """Vectorised state of a batch of paths advancing together."""

    def __init__(self, spec, s, x0, i0, n):
        self.spec = spec
        self.X = np.tile(np.asarray(x0, dtype=float).reshape(1, -1), (n, 1))
        if self.X.shape[1] != spec.dimension:
            raise ValueError("x0 dimension mismatch")
        self.I = np.full(n, spec.check_regime(i0), dtype=np.int64)
        self.alive = np.ones(n, dtype=bool)
        self.zeno = np.zeros(n, dtype=bool)
        self.run = np.zeros(n)
        self.sw = np.zeros(n)
        self.switch_count = np.zeros(n, dtype=np.int64)


def _apply_switches(batch: _Batch, targets, mask, t, cap, record_events, raise_on_zeno):
    """Apply one round of regime changes on ``mask``; returns masked indices."""
    spec = batch.spec
    idx = np.flatnonzero(mask & batch.alive & (targets != batch.I))
    if idx.size == 0:
        return idx
    old = batch.I[idx].copy()
    new = targets[idx]
    # group cost evaluation by (source, target) pair
    pairs = {}
    for q, (fi, tj) in enumerate(zip(old, new)):
        pairs.setdefault((int(fi), int(tj)), []).append(idx[q])
    for (fi, tj), rows in pairs.items():
        rows = np.asarray(rows)
        cost = np.asarray(spec.switch_cost(batch.X[rows], fi, tj), dtype=float)
        batch.sw[rows] += cost
        if record_events is not None:
            for r, c in zip(rows, cost):
                record_events.append(SwitchEvent(time=float(t), source=fi,
                                                 target=tj, cost=float(c)))
    batch.I[idx] = new
    batch.switch_count[idx] += 1
    over = idx[batch.switch_count[idx] > cap]
    if over.size:
        if raise_on_zeno:
            raise ZenoAbortError(
                f"switch cap {cap} exceeded at t={t:.6g}; the schedule "
                "accumulates switches before the horizon",
                abort_time=float(t),
                switch_count=int(batch.switch_count[over[0]]),
            )
        batch.alive[over] = False
        batch.zeno[over] = True
    return idx


def _switch_rule(batch: _Batch, strategy, t, script_pos, cap, record_events,
                 raise_on_zeno, clamp):
    """Apply the strategy at time ``t``; returns the new script position."""
    spec = batch.spec
    n = batch.I.shape[0]
    if strategy.mode == "scripted":
        while script_pos < len(strategy.script) and strategy.script[script_pos].time <= t:
            sw = strategy.script[script_pos]
            if callable(sw.target):
                targets = np.asarray(sw.target(t, batch.X, batch.I), dtype=np.int64)
                if targets.shape == ():
                    targets = np.full(n, int(targets), dtype=np.int64)
            else:
                targets = np.full(n, int(sw.target), dtype=np.int64)
            if np.any((targets < 1) | (targets > spec.regimes)):
                raise ValueError("scripted switch target outside the regime range")
            # events carry the scheduled time: step times only discretise the
            # rule, and the switch-cap estimate must see the true accumulation
            _apply_switches(batch, targets, np.ones(n, bool), sw.time, cap,
                            record_events, raise_on_zeno)
            script_pos += 1
        return script_pos

    # value mode: follow the recorded policy, chaining at most m - 1 hops
    policy = strategy.policy
    grid = policy.grid
    k = grid.nearest_time_index(t)
    layer = policy.switch_to[k].reshape(spec.regimes, -1)
    for _ in range(max(spec.regimes - 1, 0)):
        live = np.flatnonzero(batch.alive)
        if live.size == 0:
            break
        flat = grid.nearest_spatial_index(batch.X[live], clamp)
        act = layer[batch.I[live] - 1, flat]
        switching = act != STAY
        if not switching.any():
            break
        targets = batch.I.copy()
        targets[live[switching]] = act[switching]
        mask = np.zeros(batch.I.shape[0], bool)
        mask[live[switching]] = True
        _apply_switches(batch, targets, mask, t, cap, record_events, raise_on_zeno)
    return script_pos


def _simulate_batch(spec, strategy, adversary, s, x0, i0, dt_sim, seed,
                    first_path, n, record=False):
    """Advance ``n`` paths; returns payoff pieces and optional trajectory data."""
    t_grid = _time_grid(s, spec.horizon, dt_sim)
    nsteps = len(t_grid) - 1
    d = spec.dimension
    normals = np.stack(
        [_path_normals(seed, first_path + q, nsteps, d) for q in range(n)]
    ) if nsteps else np.zeros((n, 0, d))

    batch = _Batch(spec, s, x0, i0, n)
    cap = strategy.zeno_cap if strategy.zeno_cap is not None else 10 * spec.regimes
    clamp = [0]
    events = [] if record else None
    script_pos = 0
    states = [batch.X.copy()] if record else None
    regime_path = [batch.I.copy()] if record else None
    controls = [] if record else None
    cum_run = [batch.run.copy()] if record else None
    cum_sw = [batch.sw.copy()] if record else None

    ctrl_points = list(spec.control_set)
    for k in range(nsteps):
        t = float(t_grid[k])
        dtk = float(t_grid[k + 1] - t_grid[k])
        script_pos = _switch_rule(batch, strategy, t, script_pos, cap, events,
                                  raise_on_zeno=record, clamp=clamp)
        u_idx = adversary.indices_at(t, batch.X, batch.I, spec, clamp)
        live = np.flatnonzero(batch.alive)
        sqdt = math.sqrt(dtk)
        for key in np.unique(batch.I[live] * len(ctrl_points) + u_idx[live]):
            ii, ui = int(key) // len(ctrl_points), int(key) % len(ctrl_points)
            rows = live[(batch.I[live] == ii) & (u_idx[live] == ui)]
            u = ctrl_points[ui]
            xg = batch.X[rows]
            batch.run[rows] += np.asarray(
                spec.running_cost(xg, ii, u), dtype=float) * dtk
            b = np.asarray(spec.drift(xg, ii, u), dtype=float)
            sig = np.asarray(spec.diffusion(xg, ii, u), dtype=float)
            dw = normals[rows, k, :] * sqdt
            batch.X[rows] = xg + b * dtk + np.einsum("nij,nj->ni", sig, dw)
        if live.size and not np.all(np.isfinite(batch.X[live])):
            raise NumericalBlowupError(
                f"non-finite state at t={t_grid[k + 1]:.6g}", step=k
            )
        if record:
            states.append(batch.X.copy())
            regime_path.append(batch.I.copy())
            controls.append(ctrl_points[int(u_idx[0])])
            cum_run.append(batch.run.copy())
            cum_sw.append(batch.sw.copy())

    terminal = np.zeros(n)
    for ii in np.unique(batch.I):
        rows = batch.I == ii
        terminal[rows] = np.asarray(
            spec.terminal_payoff(batch.X[rows], int(ii)), dtype=float
        )
    payoff = batch.run + terminal - batch.sw
    extras = None
    if record:
        extras = {
            "t_grid": t_grid,
            "states": np.stack(states)[:, 0, :],
            "regimes": np.stack(regime_path)[:, 0],
            "controls": tuple(controls),
            "cum_run": np.array([c[0] for c in cum_run]),
            "cum_sw": np.array([c[0] for c in cum_sw]),
            "events": tuple(events),
        }
    return payoff, terminal, batch, clamp[0], extras


def simulate_path(spec, strategy, adversary, s, x0, i0, dt_sim, seed,
                  path_index: int = 0) -> TrajectoryRecord:
    """Simulate one path and record its full trajectory.

    Raises ``ZenoAbortError`` when the switch cap is exceeded and
    ``NumericalBlowupError`` on a non-finite state.
    """
    payoff, terminal, batch, clamped, extras = _simulate_batch(
        spec, strategy, adversary, s, x0, i0, dt_sim, seed,
        first_path=path_index, n=1, record=True,
    )
    adversary.clamp_count += clamped
    return TrajectoryRecord(
        times=extras["t_grid"],
        states=extras["states"],
        regimes=extras["regimes"],
        controls=extras["controls"],
        cum_running=extras["cum_run"],
        cum_switch=extras["cum_sw"],
        switches=extras["events"],
        running_reward=float(batch.run[0]),
        switch_cost_total=float(batch.sw[0]),
        terminal_value=float(terminal[0]),
        payoff=float(payoff[0]),
        seed=seed,
        path_index=path_index,
    )


def estimate_J(spec, strategy, adversary, s, x0, i0, dt_sim, n_paths, seed,
               n_workers: int = 1) -> McEstimate:
    """Monte Carlo mean of the realised payoff over independent paths.

    Aborted paths are excluded from the average and reported on the
    estimate; chunking across workers does not change the result because
    every path owns its stream and the reduction follows path order.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n_workers = max(1, int(n_workers))
    chunk = int(math.ceil(n_paths / n_workers))
    ranges = [(a, min(chunk, n_paths - a)) for a in range(0, n_paths, chunk)]

    def run_chunk(args):
        a, cnt = args
        return _simulate_batch(spec, strategy, adversary, s, x0, i0, dt_sim,
                               seed, first_path=a, n=cnt, record=False)

    if n_workers == 1 or len(ranges) == 1:
        results = [run_chunk(r) for r in ranges]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_chunk, ranges))

    payoff = np.concatenate([r[0] for r in results])
    zeno = np.concatenate([r[2].zeno for r in results])
    adversary.clamp_count += sum(r[3] for r in results)
    good = payoff[~zeno]
    n_bad = int(zeno.sum())
    if good.size == 0:
        raise EstimationError("every path exceeded its switch cap")
    mean = float(good.mean())
    std = float(good.std(ddof=1)) if good.size > 1 else 0.0
    return McEstimate(mean=mean, stderr=std / math.sqrt(good.size),
                      n_paths=int(good.size), seed=seed, zeno_failures=n_bad)


def worst_case_over_step_controls(spec, strategy, knot_grid, s, x0, i0, dt_sim,
                                  n_paths, seed, guard: int = 100_000):
    """Exhaustive infimum over deterministic step controls on a knot grid.

    ``knot_grid`` lists the interval start times (the first must be ``s``).
    Returns the minimising estimate and control; common random numbers make
    the comparison across controls deterministic.
    """
    knots = np.asarray(knot_grid, dtype=float)
    if knots.size == 0 or knots[0] != s:
        raise ValueError("knot grid must start at the initial time")
    n_combos = len(spec.control_set) ** knots.size
    if n_combos > guard:
        raise ConfigurationError(
            f"{n_combos} step controls exceed the enumeration guard {guard}"
        )
    best = None
    best_adv = None
    for combo in itertools.product(spec.control_set, repeat=knots.size):
        adv = AdversaryControl.step(spec, knots, combo)
        est = estimate_J(spec, strategy, adv, s, x0, i0, dt_sim, n_paths, seed)
        if best is None or est.mean < best.mean:
            best, best_adv = est, adv
    return best, best_adv


def dpp_check(spec, grid: Grid, value_field: ValueField, k_mid: int,
              sweep_reverse: bool = False) -> float:
    """Max deviation of a restart from layer ``k_mid`` against the stored field.

    The backward march is a composition of identical steps, so restarting
    from an intermediate layer must reproduce layer zero exactly.
    """
    if not 0 < k_mid <= grid.nt:
        raise ValueError("k_mid must lie in 1..nt")
    ops = SchemeOperators(spec, grid)
    terminal = np.array(value_field.values[k_mid])
    values, _, _, _ = _march(ops, terminal, k_mid, sweep_reverse, False, None)
    return float(np.max(np.abs(values[0] - value_field.values[0])))


def sandwich_check(spec, grid: Grid, value_field: ValueField, strategy, s, x0, i0,
                   *, knot_grid, dt_sim, n_paths, seed,
                   discretization_allowance: float = 2e-2) -> SandwichReport:
    """Achievability check: the extracted strategy's worst-case payoff cannot
    sit above the grid value once Monte Carlo and discretisation slack are
    granted."""
    est, adv = worst_case_over_step_controls(
        spec, strategy, knot_grid, s, x0, i0, dt_sim, n_paths, seed
    )
    k = grid.nearest_time_index(s)
    flat = int(grid.nearest_spatial_index(np.asarray(x0, float).reshape(1, -1))[0])
    grid_value = float(value_field.values[k, i0 - 1].ravel()[flat])
    tol = 3.0 * est.stderr + discretization_allowance
    return SandwichReport(
        lower_proxy=est.mean,
        grid_value=grid_value,
        stderr=est.stderr,
        tolerance=tol,
        passed=bool(est.mean <= grid_value + tol),
        worst_control_values=tuple(adv.knot_values),
    )
