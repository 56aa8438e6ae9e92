"""Monotone explicit finite-difference solver for the switching-game system.

One value surface per regime is marched backward from the terminal payoff.
Each step applies the explicit update

    W_i = V_i(t+dt) + dt * min_u [ L(i,u) V_i(t+dt) + f(x, i, u) ]

with drift-sign upwinding for first derivatives and central differences for
second derivatives (monotone under the grid's step-size bound), followed by
projection onto the switching obstacle

    V_i = max( W_i,  max_{j != i} [ V_j - c(x, i, j) ] )

via Gauss-Seidel sweeps over regimes.  Boundary nodes are filled by linear
extrapolation from the two nearest interior nodes, so accuracy statements
hold on an interior window.

The projection is an ascending iteration from ``W`` toward the least fixed
point above it, hence its limit does not depend on the sweep order; with no
zero-cost regime loops at most ``m - 1`` improving sweeps can occur.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import NoFreeLoopError, NumericalBlowupError
from .grid import Grid
from .problem import ProblemSpec

__all__ = [
    "ValueField",
    "PolicyField",
    "ResidualStats",
    "generator_apply",
    "hamiltonian",
    "switch_obstacle",
    "step_backward",
    "solve",
    "residual_check",
    "obstacle_violation",
    "terminal_error",
]

STAY = 0  # sentinel in the switch-target array


@dataclass(eq=False)
class ValueField:
    """Numerical value surfaces, indexed ``values[time, regime-1, *node]``."""

    grid: Grid
    label: str
    values: np.ndarray
    residual: Optional["ResidualStats"] = None

    @property
    def regimes(self) -> int:
        return self.values.shape[1]

    def layer(self, k: int) -> np.ndarray:
        return self.values[k]

    def value_at(self, k: int, i: int, index) -> float:
        return float(self.values[(k, i - 1) + tuple(index)])


@dataclass(eq=False)
class PolicyField:
    """Per-node decisions, same axis layout as the value field.

    ``switch_to`` holds the 1-based target regime or ``STAY`` (0);
    ``control_index`` the position in ``control_set`` attaining the inner
    minimum of the Hamiltonian.
    """

    grid: Grid
    control_set: tuple
    switch_to: np.ndarray
    control_index: np.ndarray

    def action_at(self, k: int, i: int, index):
        j = int(self.switch_to[(k, i - 1) + tuple(index)])
        return ("STAY", None) if j == STAY else ("SWITCH", j)

    def control_at(self, k: int, i: int, index):
        return self.control_set[int(self.control_index[(k, i - 1) + tuple(index)])]


@dataclass(frozen=True)
class ResidualStats:
    """Discrete complementarity statistics over collar-free interior nodes."""

    max_abs: float
    mean_abs: float
    worst: tuple  # (time index, regime, node multi-index)
    terminal_obstacle_min: float
    tolerance: float
    n_evaluated: int

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance


class PolicyLayer(NamedTuple):
    switch_to: np.ndarray
    control_index: np.ndarray


def _interior(d):
    return (slice(1, -1),) * d


def _shift(d, k, off):
    sl = [slice(1, -1)] * d
    sl[k] = slice(2, None) if off > 0 else slice(0, -2)
    return tuple(sl)


def _shift2(d, k, off_k, l, off_l):
    sl = [slice(1, -1)] * d
    sl[k] = slice(2, None) if off_k > 0 else slice(0, -2)
    sl[l] = slice(2, None) if off_l > 0 else slice(0, -2)
    return tuple(sl)


def _fill_boundary(arr: np.ndarray, linear: bool = True):
    """Fill edge hyperplanes from the nearest interior ones.

    Pass ``k`` writes the dimension-``k`` edges over the full range of the
    dimensions already processed and the interior range of the rest, so
    corners resolve after the last pass.
    """
    d = arr.ndim
    for k in range(d):
        pre = (slice(None),) * k
        post = tuple(slice(1, -1) for _ in range(k + 1, d))
        n = arr.shape[k]
        if linear and n >= 4:
            arr[pre + (0,) + post] = 2 * arr[pre + (1,) + post] - arr[pre + (2,) + post]
            arr[pre + (n - 1,) + post] = (
                2 * arr[pre + (n - 2,) + post] - arr[pre + (n - 3,) + post]
            )
        else:
            arr[pre + (0,) + post] = arr[pre + (1,) + post]
            arr[pre + (n - 1,) + post] = arr[pre + (n - 2,) + post]


class SchemeOperators:
    """Coefficient arrays sampled on the grid, shared by every time step."""

    def __init__(self, spec: ProblemSpec, grid: Grid):
        if grid.dim != spec.dimension:
            raise ValueError("grid dimension does not match the problem")
        self.spec = spec
        self.grid = grid
        d, shape = grid.dim, grid.shape
        nodes = grid.nodes()
        m, nu = spec.regimes, len(spec.control_set)

        self.b_plus = np.empty((m, nu, d) + shape)
        self.b_minus = np.empty((m, nu, d) + shape)
        self.a_diag = np.empty((m, nu, d) + shape)
        self.a_cross = [[[] for _ in range(nu)] for _ in range(m)]
        self.f = np.empty((m, nu) + shape)
        for ii in range(m):
            for ui, u in enumerate(spec.control_set):
                b = np.asarray(spec.drift(nodes, ii + 1, u), dtype=float)
                sig = np.asarray(spec.diffusion(nodes, ii + 1, u), dtype=float)
                a = np.einsum("nij,nkj->nik", sig, sig)
                for k in range(d):
                    bk = b[:, k].reshape(shape)
                    self.b_plus[ii, ui, k] = np.maximum(bk, 0.0)
                    self.b_minus[ii, ui, k] = np.maximum(-bk, 0.0)
                    self.a_diag[ii, ui, k] = a[:, k, k].reshape(shape)
                for k in range(d):
                    for l in range(k + 1, d):
                        akl = a[:, k, l].reshape(shape)
                        if np.any(akl):
                            self.a_cross[ii][ui].append(((k, l), akl))
                self.f[ii, ui] = np.asarray(
                    spec.running_cost(nodes, ii + 1, u), dtype=float
                ).reshape(shape)

        self.c = {}
        for ii in range(m):
            for jj in range(m):
                if ii != jj:
                    self.c[(ii, jj)] = np.asarray(
                        spec.switch_cost(nodes, ii + 1, jj + 1), dtype=float
                    ).reshape(shape)

    def generator_interior(self, phi: np.ndarray, ii: int, ui: int) -> np.ndarray:
        d = self.grid.dim
        dx = self.grid.dx
        C = _interior(d)
        ce = phi[C]
        out = np.zeros_like(ce)
        for k in range(d):
            up = phi[_shift(d, k, +1)]
            dn = phi[_shift(d, k, -1)]
            out += self.b_plus[ii, ui, k][C] * (up - ce) / dx[k]
            out -= self.b_minus[ii, ui, k][C] * (ce - dn) / dx[k]
            out += 0.5 * self.a_diag[ii, ui, k][C] * (up - 2.0 * ce + dn) / dx[k] ** 2
        for (k, l), akl in self.a_cross[ii][ui]:
            pp = phi[_shift2(d, k, +1, l, +1)]
            mm = phi[_shift2(d, k, -1, l, -1)]
            pm = phi[_shift2(d, k, +1, l, -1)]
            mp = phi[_shift2(d, k, -1, l, +1)]
            out += akl[C] * (pp + mm - pm - mp) / (4.0 * dx[k] * dx[l])
        return out

    def hamiltonian_interior(self, phi: np.ndarray, ii: int):
        """Exact minimum over the control list; ties keep the first control."""
        C = _interior(self.grid.dim)
        best = None
        arg = None
        for ui in range(len(self.spec.control_set)):
            val = self.generator_interior(phi, ii, ui) + self.f[ii, ui][C]
            if best is None:
                best = val
                arg = np.zeros(val.shape, dtype=np.int32)
            else:
                better = val < best
                np.copyto(best, val, where=better)
                arg[better] = ui
        return best, arg

    def obstacle_layer(self, layer: np.ndarray, ii: int) -> np.ndarray:
        m = layer.shape[0]
        out = np.full(self.grid.shape, -np.inf)
        for jj in range(m):
            if jj != ii:
                np.maximum(out, layer[jj] - self.c[(ii, jj)], out=out)
        return out

    def obstacle_target(self, layer: np.ndarray, ii: int):
        """Obstacle value and attaining 1-based target, lowest index on ties."""
        m = layer.shape[0]
        best = np.full(self.grid.shape, -np.inf)
        tgt = np.zeros(self.grid.shape, dtype=np.int32)
        for jj in range(m):
            if jj == ii:
                continue
            cand = layer[jj] - self.c[(ii, jj)]
            better = cand > best
            np.copyto(best, cand, where=better)
            tgt[better] = jj + 1
        return best, tgt


def _project_obstacle(ops: SchemeOperators, V: np.ndarray, sweep_reverse: bool):
    """Gauss-Seidel ascent to the obstacle fixed point, in place."""
    spec = ops.spec
    m = V.shape[0]
    if m == 1:
        return
    order = range(m - 1, -1, -1) if sweep_reverse else range(m)
    loose_cap = max(4 * m, 8)
    changing = 0
    while True:
        changed = False
        for ii in order:
            obst = ops.obstacle_layer(V, ii)
            mask = obst > V[ii]
            if mask.any():
                changed = True
                V[ii][mask] = obst[mask]
        if not changed:
            return
        changing += 1
        if spec.allow_zero_cost_loops:
            if changing >= loose_cap:
                warnings.warn(
                    "obstacle projection stopped at the loose sweep cap "
                    f"({loose_cap}); zero-cost regime loops are present",
                    RuntimeWarning,
                )
                return
        elif changing > m - 1:
            raise NoFreeLoopError(
                f"obstacle projection still improving after {m - 1} sweeps; "
                "the switching costs admit a zero-cost loop"
            )


def _step(ops: SchemeOperators, layer_next: np.ndarray, sweep_reverse: bool):
    """One backward step; returns final layer, policy arrays, and residual data."""
    spec, grid = ops.spec, ops.grid
    d, m = grid.dim, spec.regimes
    dt = grid.dt
    C = _interior(d)

    W = np.empty_like(layer_next)
    control_index = np.zeros((m,) + grid.shape, dtype=np.int32)
    H_all = []
    for ii in range(m):
        H, am = ops.hamiltonian_interior(layer_next[ii], ii)
        H_all.append(H)
        Wi = layer_next[ii].copy()
        Wi[C] = layer_next[ii][C] + dt * H
        _fill_boundary(Wi, linear=True)
        W[ii] = Wi
        A = np.zeros(grid.shape, dtype=np.int32)
        A[C] = am
        _fill_boundary(A, linear=False)
        control_index[ii] = A

    V = W.copy()
    _project_obstacle(ops, V, sweep_reverse)

    switch_to = np.zeros((m,) + grid.shape, dtype=np.int32)
    for ii in range(m):
        if m > 1:
            _, tgt = ops.obstacle_target(V, ii)
            lifted = V[ii] > W[ii]
            switch_to[ii][lifted] = tgt[lifted]
    return V, PolicyLayer(switch_to, control_index), W, H_all


def _collar(d, shape):
    if any(n < 5 for n in shape):
        return None
    return (slice(2, -2),) * d


def _residual_layer(ops, V, layer_next, H_all, collar):
    """Complementarity residual min(PDE residual, obstacle residual) on the collar."""
    grid = ops.grid
    dt = grid.dt
    inner = (slice(1, -1),) * grid.dim  # collar relative to interior arrays
    m = V.shape[0]
    worst = 0.0
    worst_loc = None
    total, count = 0.0, 0
    for ii in range(m):
        r1 = (V[ii][collar] - layer_next[ii][collar]) / dt - H_all[ii][inner]
        if m > 1:
            r2 = V[ii][collar] - ops.obstacle_layer(V, ii)[collar]
            res = np.minimum(r1, r2)
        else:
            res = r1
        a = np.abs(res)
        total += float(a.sum())
        count += a.size
        mx = float(a.max()) if a.size else 0.0
        if mx > worst:
            worst = mx
            flat = int(np.argmax(a))
            loc = np.unravel_index(flat, res.shape)
            worst_loc = (ii + 1, tuple(int(q) + 2 for q in loc))
    return worst, worst_loc, total, count


def solve(
    spec: ProblemSpec,
    grid: Grid,
    *,
    sweep_reverse: bool = False,
    label: str = "V",
    residual_tolerance: Optional[float] = None,
    collect_residual: bool = True,
):
    """Solve the coupled obstacle system backward from the terminal payoff.

    Returns ``(ValueField, PolicyField)``.  The terminal layer equals the
    terminal payoff exactly; every interior layer satisfies the discrete
    obstacle constraint by construction.  Complementarity statistics are
    collected on the fly and attached to the field.
    """
    ops = SchemeOperators(spec, grid)
    nodes = grid.nodes()
    m = spec.regimes
    terminal = np.stack(
        [
            np.asarray(spec.terminal_payoff(nodes, i), dtype=float).reshape(grid.shape)
            for i in range(1, m + 1)
        ]
    )
    values, switch_to, control_index, res = _march(
        ops, terminal, grid.nt, sweep_reverse, collect_residual, residual_tolerance
    )
    field = ValueField(grid=grid, label=label, values=values, residual=res)
    policy = PolicyField(
        grid=grid,
        control_set=tuple(spec.control_set),
        switch_to=switch_to,
        control_index=control_index,
    )
    values.flags.writeable = False
    switch_to.flags.writeable = False
    control_index.flags.writeable = False
    return field, policy


def _march(ops, terminal, nsteps, sweep_reverse, collect_residual, residual_tolerance):
    grid, spec = ops.grid, ops.spec
    m = spec.regimes
    values = np.empty((nsteps + 1, m) + grid.shape)
    values[nsteps] = terminal
    switch_to = np.zeros((nsteps + 1, m) + grid.shape, dtype=np.int32)
    control_index = np.zeros((nsteps + 1, m) + grid.shape, dtype=np.int32)

    collar = _collar(grid.dim, grid.shape) if collect_residual else None
    worst, worst_loc, total, count = 0.0, None, 0.0, 0
    for k in range(nsteps - 1, -1, -1):
        layer, pol, W, H_all = _step(ops, values[k + 1], sweep_reverse)
        if not np.all(np.isfinite(layer)):
            raise NumericalBlowupError(
                f"non-finite value produced at backward step {k}", step=k
            )
        values[k] = layer
        switch_to[k] = pol.switch_to
        control_index[k] = pol.control_index
        if collar is not None:
            w, loc, tot, cnt = _residual_layer(ops, layer, values[k + 1], H_all, collar)
            total += tot
            count += cnt
            if w > worst:
                worst, worst_loc = w, (k,) + loc
    if nsteps >= 1:
        control_index[nsteps] = control_index[nsteps - 1]

    res = None
    if collar is not None:
        tol = residual_tolerance if residual_tolerance is not None else 1e-12 / grid.dt
        term_min = np.inf
        if m > 1:
            for ii in range(m):
                gap = terminal[ii] - ops.obstacle_layer(terminal, ii)
                term_min = min(term_min, float(gap.min()))
        res = ResidualStats(
            max_abs=worst,
            mean_abs=total / count if count else 0.0,
            worst=worst_loc,
            terminal_obstacle_min=term_min,
            tolerance=tol,
            n_evaluated=count,
        )
    return values, switch_to, control_index, res


def step_backward(spec: ProblemSpec, grid: Grid, layer_next, *, sweep_reverse=False):
    """Advance one backward step from per-regime spatial arrays.

    ``layer_next`` has shape ``(m, *grid.shape)``.  Returns the new layer and
    the policy arrays recorded for it.
    """
    layer_next = np.asarray(layer_next, dtype=float)
    if not np.all(np.isfinite(layer_next)):
        raise ValueError("layer contains non-finite values")
    ops = SchemeOperators(spec, grid)
    layer, pol, _, _ = _step(ops, layer_next, sweep_reverse)
    return layer, pol


def generator_apply(spec: ProblemSpec, grid: Grid, values, node, i: int, u) -> float:
    """Discrete generator of regime ``i`` under control ``u`` at one node.

    Upwind first differences in the sign of each drift component, central
    second differences; raises ``ValueError`` on boundary nodes, which are
    handled by extrapolation inside the stepping loop instead.
    """
    spec.check_regime(i)
    node = tuple(int(q) for q in np.atleast_1d(node))
    if grid.is_boundary(node):
        raise ValueError(f"node {node} lies on the grid boundary")
    values = np.asarray(values, dtype=float)
    x = grid.point(node)[None, :]
    b = np.asarray(spec.drift(x, i, u), dtype=float)[0]
    sig = np.asarray(spec.diffusion(x, i, u), dtype=float)[0]
    a = sig @ sig.T
    d = grid.dim
    out = 0.0
    ce = float(values[node])
    for k in range(d):
        up_idx = node[:k] + (node[k] + 1,) + node[k + 1 :]
        dn_idx = node[:k] + (node[k] - 1,) + node[k + 1 :]
        up, dn = float(values[up_idx]), float(values[dn_idx])
        if b[k] >= 0:
            out += b[k] * (up - ce) / grid.dx[k]
        else:
            out += b[k] * (ce - dn) / grid.dx[k]
        out += 0.5 * a[k, k] * (up - 2.0 * ce + dn) / grid.dx[k] ** 2
    for k in range(d):
        for l in range(k + 1, d):
            if a[k, l] == 0.0:
                continue
            def at(ok, ol):
                idx = list(node)
                idx[k] += ok
                idx[l] += ol
                return float(values[tuple(idx)])
            out += (
                a[k, l]
                * (at(1, 1) + at(-1, -1) - at(1, -1) - at(-1, 1))
                / (4.0 * grid.dx[k] * grid.dx[l])
            )
    return float(out)


def hamiltonian(spec: ProblemSpec, grid: Grid, values, node, i: int):
    """Inner infimum over the control list at one node.

    Returns ``(value, control point)``; ties keep the earliest control.
    """
    x = grid.point(tuple(int(q) for q in np.atleast_1d(node)))[None, :]
    best, best_u = None, None
    for u in spec.control_set:
        val = generator_apply(spec, grid, values, node, i, u)
        val += float(np.asarray(spec.running_cost(x, i, u), dtype=float)[0])
        if best is None or val < best:
            best, best_u = val, u
    return best, best_u


def switch_obstacle(values_at_node, x, i: int, spec: ProblemSpec):
    """Best switch value ``max_{j != i} [V_j - c(x, i, j)]`` and its target.

    Returns ``(-inf, None)`` when there is only one regime; ties pick the
    lowest admissible target index.
    """
    vals = np.asarray(values_at_node, dtype=float)
    m = spec.regimes
    if vals.shape[0] != m:
        raise ValueError("need one value per regime")
    spec.check_regime(i)
    if m == 1:
        return float("-inf"), None
    pt = spec.as_points(x)
    best, target = -np.inf, None
    for j in range(1, m + 1):
        if j == i:
            continue
        cand = float(vals[j - 1]) - float(np.asarray(spec.switch_cost(pt, i, j))[0])
        if cand > best:
            best, target = cand, j
    return best, target


def residual_check(field: ValueField, spec: ProblemSpec, grid: Grid,
                   tolerance: Optional[float] = None) -> ResidualStats:
    """Recompute complementarity residuals of a stored field.

    Uses the same discrete operators as the stepping loop, evaluated on
    interior nodes at least two cells from the boundary.
    """
    ops = SchemeOperators(spec, grid)
    collar = _collar(grid.dim, grid.shape)
    if collar is None:
        raise ValueError("grid too small for a one-cell collar (need nx >= 5)")
    nt = field.values.shape[0] - 1
    worst, worst_loc, total, count = 0.0, None, 0.0, 0
    for k in range(nt):
        H_all = [
            ops.hamiltonian_interior(field.values[k + 1][ii], ii)[0]
            for ii in range(spec.regimes)
        ]
        w, loc, tot, cnt = _residual_layer(
            ops, field.values[k], field.values[k + 1], H_all, collar
        )
        total += tot
        count += cnt
        if w > worst:
            worst, worst_loc = w, (k,) + loc
    term_min = np.inf
    if spec.regimes > 1:
        for ii in range(spec.regimes):
            gap = field.values[nt][ii] - ops.obstacle_layer(field.values[nt], ii)
            term_min = min(term_min, float(gap.min()))
    tol = tolerance if tolerance is not None else 1e-12 / grid.dt
    return ResidualStats(
        max_abs=worst,
        mean_abs=total / count if count else 0.0,
        worst=worst_loc,
        terminal_obstacle_min=term_min,
        tolerance=tol,
        n_evaluated=count,
    )


def obstacle_violation(field: ValueField, spec: ProblemSpec, grid: Grid) -> float:
    """Worst violation of the discrete obstacle constraint over all nodes."""
    ops = SchemeOperators(spec, grid)
    if spec.regimes == 1:
        return 0.0
    worst = 0.0
    for k in range(field.values.shape[0]):
        for ii in range(spec.regimes):
            gap = ops.obstacle_layer(field.values[k], ii) - field.values[k][ii]
            worst = max(worst, float(gap.max()))
    return worst


def terminal_error(field: ValueField, spec: ProblemSpec, grid: Grid) -> float:
    """Max deviation of the stored terminal layer from the terminal payoff."""
    nodes = grid.nodes()
    nt = field.values.shape[0] - 1
    worst = 0.0
    for i in range(1, spec.regimes + 1):
        g = np.asarray(spec.terminal_payoff(nodes, i), dtype=float).reshape(grid.shape)
        worst = max(worst, float(np.max(np.abs(field.values[nt][i - 1] - g))))
    return worst
