"""First-order max-min / min-max games over a single regime-free surface.

When regime changes cost nothing the switching game collapses to a two-player
game on one unknown ``w``: the regime becomes the maximiser's instantaneous
choice and the control the minimiser's.  The lower game applies
``max_i min_u L(i,u) w`` and the upper game ``min_u max_i L(i,u) w``; their
pointwise gap measures failure of the max-min/min-max interchange, and the
two solved surfaces bracket each other accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalBlowupError
from .grid import Grid
from .hjb import SchemeOperators, ValueField, _fill_boundary, _interior
from .problem import ProblemSpec

__all__ = [
    "LOWER",
    "UPPER",
    "IsaacsReport",
    "lower_isaacs_hamiltonian",
    "upper_isaacs_hamiltonian",
    "solve_isaacs",
    "isaacs_check",
]

LOWER = "lower"
UPPER = "upper"


@dataclass(frozen=True)
class IsaacsReport:
    """Sampled lower/upper Hamiltonian values over gradient slopes.

    Evaluated on affine test profiles, so only the drift enters; ``holds``
    is true when the max-min and min-max values agree at every sample.
    """

    p_samples: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    gap: np.ndarray
    max_gap: float
    holds: bool
    tolerance: float


def _drift_table(spec: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Drift at one point for every (regime, control), shape (m, nu, d)."""
    pts = spec.as_points(x)
    m, nu = spec.regimes, len(spec.control_set)
    out = np.empty((m, nu, spec.dimension))
    for i in range(1, m + 1):
        for ui, u in enumerate(spec.control_set):
            out[i - 1, ui] = np.asarray(spec.drift(pts, i, u), dtype=float)[0]
    return out


def _node_values(ops: SchemeOperators, values, node):
    vals = np.empty((ops.spec.regimes, len(ops.spec.control_set)))
    C_rel = tuple(q - 1 for q in node)  # interior arrays start at full index 1
    for ii in range(ops.spec.regimes):
        for ui in range(len(ops.spec.control_set)):
            vals[ii, ui] = ops.generator_interior(values, ii, ui)[C_rel]
    return vals


def lower_isaacs_hamiltonian(spec: ProblemSpec, grid: Grid, values, node) -> float:
    """``max_i min_u`` of the discrete generator applied to one surface."""
    node = tuple(int(q) for q in np.atleast_1d(node))
    if grid.is_boundary(node):
        raise ValueError(f"node {node} lies on the grid boundary")
    ops = SchemeOperators(spec, grid)
    vals = _node_values(ops, np.asarray(values, dtype=float), node)
    return float(np.max(np.min(vals, axis=1)))


def upper_isaacs_hamiltonian(spec: ProblemSpec, grid: Grid, values, node) -> float:
    """``min_u max_i`` of the discrete generator applied to one surface."""
    node = tuple(int(q) for q in np.atleast_1d(node))
    if grid.is_boundary(node):
        raise ValueError(f"node {node} lies on the grid boundary")
    ops = SchemeOperators(spec, grid)
    vals = _node_values(ops, np.asarray(values, dtype=float), node)
    return float(np.min(np.max(vals, axis=0)))


def solve_isaacs(spec: ProblemSpec, grid: Grid, side: str = LOWER) -> ValueField:
    """Backward explicit solve of the chosen first-order game.

    Terminal data is the regime-1 terminal payoff (the collapsed game has a
    single surface).  Uses the same upwind operators as the obstacle solver.
    """
    if side not in (LOWER, UPPER):
        raise ValueError(f"side must be '{LOWER}' or '{UPPER}'")
    ops = SchemeOperators(spec, grid)
    d = grid.dim
    C = _interior(d)
    m, nu = spec.regimes, len(spec.control_set)
    nodes = grid.nodes()
    w = np.asarray(spec.terminal_payoff(nodes, 1), dtype=float).reshape(grid.shape)

    values = np.empty((grid.nt + 1, 1) + grid.shape)
    values[grid.nt, 0] = w
    for k in range(grid.nt - 1, -1, -1):
        prev = values[k + 1, 0]
        per_regime = []
        for ii in range(m):
            gen = [ops.generator_interior(prev, ii, ui) for ui in range(nu)]
            stacked = np.stack(gen)
            per_regime.append(
                stacked.min(axis=0) if side == LOWER else stacked
            )
        if side == LOWER:
            H = np.stack(per_regime).max(axis=0)
        else:
            # min over u of max over i: reduce regimes first, controls second
            all_vals = np.stack(per_regime)        # (m, nu, *interior)
            H = all_vals.max(axis=0).min(axis=0)
        layer = prev.copy()
        layer[C] = prev[C] + grid.dt * H
        _fill_boundary(layer, linear=True)
        if not np.all(np.isfinite(layer)):
            raise NumericalBlowupError(
                f"non-finite value produced at backward step {k}", step=k
            )
        values[k, 0] = layer
    values.flags.writeable = False
    return ValueField(grid=grid, label="V_FS" if side == LOWER else "U_FS",
                      values=values)


def isaacs_check(spec: ProblemSpec, p_samples, x=None, tolerance: float = 1e-9
                 ) -> IsaacsReport:
    """Compare max-min and min-max Hamiltonians on affine slopes.

    For each slope ``p`` the generator acting on ``w(y) = p . y`` reduces to
    ``b(x, i, u) . p``, evaluated at the reference point ``x`` (origin by
    default).  Weak duality guarantees lower <= upper at every sample.
    """
    p_arr = np.atleast_1d(np.asarray(p_samples, dtype=float))
    if p_arr.size == 0:
        raise ValueError("p_samples must be nonempty")
    if p_arr.ndim == 1 and spec.dimension == 1:
        p_arr = p_arr[:, None]
    if p_arr.shape[1] != spec.dimension:
        raise ValueError("slope samples must match the spatial dimension")
    ref = np.zeros(spec.dimension) if x is None else np.asarray(x, dtype=float)
    table = _drift_table(spec, ref)  # (m, nu, d)

    lower = np.empty(p_arr.shape[0])
    upper = np.empty(p_arr.shape[0])
    for k, p in enumerate(p_arr):
        vals = table @ p  # (m, nu)
        lower[k] = float(np.max(np.min(vals, axis=1)))
        upper[k] = float(np.min(np.max(vals, axis=0)))
    gap = upper - lower
    return IsaacsReport(
        p_samples=p_arr.squeeze(axis=1) if spec.dimension == 1 else p_arr,
        lower=lower,
        upper=upper,
        gap=gap,
        max_gap=float(gap.max()),
        holds=bool(np.all(gap <= tolerance)),
        tolerance=tolerance,
    )
