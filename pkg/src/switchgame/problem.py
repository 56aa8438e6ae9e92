"""Problem data for the robust switching game and its standing-assumption checks.

A problem instance consists of controlled dynamics ``dX = b(X, I, u) dt +
sigma(X, I, u) dW`` over regimes ``I in {1, ..., m}``, a running reward ``f``,
a terminal payoff ``g``, and a switching cost ``c(x, i, j)`` paid by the
controller each time the regime changes.  The adversary picks ``u`` from a
finite control set.  Coefficients are black-box callables, so the structural
assumptions (Lipschitz drift/diffusion, nonnegative costs with zero diagonal,
polynomial growth, terminal consistency, no zero-cost regime loop) are checked
by sampling rather than proved.

Coefficient calling convention (vectorised over a batch of points):

    drift(x, i, u)            x: (n, d) -> (n, d)
    diffusion(x, i, u)        x: (n, d) -> (n, d, d)
    running_cost(x, i, u)     x: (n, d) -> (n,)
    terminal_payoff(x, i)     x: (n, d) -> (n,)
    switch_cost(x, i, j)      x: (n, d) -> (n,)

with ``i``, ``j`` 1-based regime labels and ``u`` one element of
``control_set``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EstimationError

__all__ = [
    "ProblemSpec",
    "GrowthBounds",
    "AssumptionCheck",
    "ValidationReport",
    "validate_spec",
    "no_free_loop",
    "growth_envelope",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Full data of one switching-game instance.

    ``growth_exp`` is the declared polynomial growth exponent ``p >= 1`` of
    the reward data (running cost, terminal payoff, switching cost).
    ``allow_zero_cost_loops`` marks instances where a zero-total-cost regime
    cycle is expected; validation then reports the violation without treating
    the instance as broken, and the obstacle projection falls back to a loose
    sweep budget.
    """

    name: str
    dimension: int
    horizon: float
    regimes: int
    control_set: tuple
    drift: Callable
    diffusion: Callable
    running_cost: Callable
    terminal_payoff: Callable
    switch_cost: Callable
    growth_exp: float = 1.0
    allow_zero_cost_loops: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.regimes < 1:
            raise ValueError("regimes must be a positive integer")
        if len(self.control_set) == 0:
            raise ValueError("control_set must be nonempty")
        if self.growth_exp < 1:
            raise ValueError("growth_exp must be >= 1")

    def check_regime(self, i: int) -> int:
        if not 1 <= i <= self.regimes:
            raise ValueError(f"regime {i} outside 1..{self.regimes}")
        return int(i)

    def as_points(self, x) -> np.ndarray:
        """Normalise ``x`` to a (n, d) float array of sample points."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dimension:
            if pts.shape[0] == self.dimension and pts.shape[1] != self.dimension:
                pts = pts.T
            else:
                raise ValueError(
                    f"points have dimension {pts.shape[1]}, spec has {self.dimension}"
                )
        return pts

    def cost_matrix(self, x) -> np.ndarray:
        """Switching-cost matrix at a single point, shape (m, m)."""
        pts = self.as_points(x)
        m = self.regimes
        out = np.zeros((m, m))
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                out[i - 1, j - 1] = float(np.asarray(self.switch_cost(pts, i, j))[0])
        return out


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one sampled assumption check."""

    name: str
    passed: bool
    detail: str = ""
    witness: Optional[tuple] = None
    constant: Optional[float] = None


@dataclass(frozen=True)
class ValidationReport:
    """Per-assumption verdicts plus the sampled constants they produced."""

    checks: dict
    sample_points: np.ndarray
    lipschitz: float
    drift_growth: float
    reward_growth: float

    def passed(self, name: str) -> bool:
        return self.checks[name].passed

    def failures(self) -> list:
        return [c for c in self.checks.values() if not c.passed]

    def all_passed(self) -> bool:
        return not self.failures()


@dataclass(frozen=True)
class GrowthBounds:
    """Computable growth constants and the exponential lower envelope.

    ``envelope(s, x) = -scale * exp(rate * (T - s)) * (1 + |x|^envelope_exp)``
    lies below the game value everywhere; ``rate * scale`` dominates the
    composite constant obtained from the sampled coefficient bounds, which is
    exactly what makes the envelope a subsolution.
    """

    lipschitz: float          # sampled Lipschitz ratio of b, sigma in x
    drift_growth: float       # linear-growth constant of b, sigma
    reward_growth: float      # polynomial-growth constant of f, g, c
    growth_exp: float         # declared exponent p >= 1 of the reward data
    envelope_exp: float       # q = max(4, p)
    scale: float              # envelope magnitude C
    rate: float               # envelope rate lambda, rate * scale >= composite
    composite: float          # the composite constant the rate must dominate
    horizon: float

    def envelope(self, s, x) -> np.ndarray:
        """Evaluate the lower envelope at time ``s`` and points ``x``."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        with np.errstate(over="ignore"):
            grow = np.exp(min(self.rate * (self.horizon - s), 700.0))
        return -self.scale * grow * (1.0 + r ** self.envelope_exp)


def no_free_loop(cost_matrix, zero_tol: float = 0.0):
    """Check that every regime cycle has strictly positive total cost.

    With nonnegative entries a cycle has total cost zero exactly when each of
    its edges costs zero, so the check reduces to cycle detection on the
    directed graph of zero-cost off-diagonal edges.

    Returns ``(passed, witness)`` where ``witness`` is ``None`` on success and
    otherwise the shortest zero-cost cycle as a 1-based regime list with the
    start repeated at the end (ties broken lexicographically).
    """
    mat = np.asarray(cost_matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("cost matrix must be square")
    m = mat.shape[0]
    if np.any(mat < -zero_tol):
        raise ValueError("cost matrix has a negative entry")
    if np.any(np.abs(np.diag(mat)) > zero_tol):
        raise ValueError("cost matrix has a nonzero diagonal entry")

    zero_edge = (mat <= zero_tol) & ~np.eye(m, dtype=bool)
    if not zero_edge.any():
        return True, None

    succ = [np.flatnonzero(zero_edge[i]) for i in range(m)]

    def dist_to(target: int) -> np.ndarray:
        # BFS on the reversed zero-cost graph: d[v] = shortest v -> target.
        d = np.full(m, -1, dtype=int)
        d[target] = 0
        frontier = [target]
        while frontier:
            nxt = []
            for v in frontier:
                for u in range(m):
                    if zero_edge[u, v] and d[u] < 0:
                        d[u] = d[v] + 1
                        nxt.append(u)
            frontier = nxt
        return d

    best_len = None
    best_start = None
    best_rdist = None
    for s in range(m):
        rd = dist_to(s)
        lengths = [1 + rd[v] for v in succ[s] if rd[v] >= 0]
        if not lengths:
            continue
        length = min(lengths)
        if best_len is None or length < best_len:
            best_len, best_start, best_rdist = length, s, rd
    if best_len is None:
        return True, None

    # Greedy reconstruction of the lexicographically smallest shortest cycle.
    path = [best_start]
    current, remaining = best_start, best_len
    while remaining > 0:
        for v in succ[current]:
            if remaining == 1:
                if v == best_start:
                    current = v
                    break
            elif best_rdist[v] == remaining - 1:
                current = v
                path.append(v)
                break
        remaining -= 1
    path.append(best_start)
    return False, [int(p) + 1 for p in path]


def _pairwise_lipschitz(spec: ProblemSpec, pts: np.ndarray) -> float:
    """Max finite-difference ratio of drift and diffusion over sample pairs."""
    n = pts.shape[0]
    if n < 2:
        return 0.0
    worst = 0.0
    for i in range(1, spec.regimes + 1):
        for u in spec.control_set:
            b = np.asarray(spec.drift(pts, i, u), dtype=float)
            sig = np.asarray(spec.diffusion(pts, i, u), dtype=float)
            for a in range(n - 1):
                dx = np.linalg.norm(pts[a + 1 :] - pts[a], axis=1)
                ok = dx > 0
                if not ok.any():
                    continue
                db = np.linalg.norm(b[a + 1 :] - b[a], axis=1)
                ds = np.sqrt(
                    np.sum((sig[a + 1 :] - sig[a]) ** 2, axis=(1, 2))
                )
                worst = max(worst, float(np.max((db[ok] + ds[ok]) / dx[ok])))
    return worst


def validate_spec(spec: ProblemSpec, sample_points) -> ValidationReport:
    """Run every sampled assumption check at the given points.

    Raises ``ValueError`` on an empty sample set.  The no-free-loop check is
    evaluated pointwise; its witness records both the offending point and the
    zero-cost cycle.
    """
    pts = spec.as_points(sample_points)
    if pts.shape[0] == 0:
        raise ValueError("sample_points must be nonempty")
    m = spec.regimes
    radius = np.linalg.norm(pts, axis=1)
    checks = {}

    lip = _pairwise_lipschitz(spec, pts)
    checks["drift_diffusion_lipschitz"] = AssumptionCheck(
        "drift_diffusion_lipschitz",
        passed=bool(np.isfinite(lip)),
        detail=f"max sampled ratio {lip:.6g}",
        constant=lip,
    )

    m1 = 0.0
    for i in range(1, m + 1):
        for u in spec.control_set:
            b = np.asarray(spec.drift(pts, i, u), dtype=float)
            sig = np.asarray(spec.diffusion(pts, i, u), dtype=float)
            size = np.linalg.norm(b, axis=1) + np.sqrt(np.sum(sig ** 2, axis=(1, 2)))
            m1 = max(m1, float(np.max(size / (1.0 + radius))))
    checks["drift_diffusion_linear_growth"] = AssumptionCheck(
        "drift_diffusion_linear_growth",
        passed=bool(np.isfinite(m1)),
        detail=f"linear-growth constant {m1:.6g}",
        constant=m1,
    )

    poly = 1.0 + radius ** spec.growth_exp
    m2 = 0.0
    nonneg_ok, nonneg_witness = True, None
    diag_ok, diag_witness = True, None
    for i in range(1, m + 1):
        g_i = np.asarray(spec.terminal_payoff(pts, i), dtype=float)
        m2 = max(m2, float(np.max(np.abs(g_i) / poly)))
        for u in spec.control_set:
            f_iu = np.asarray(spec.running_cost(pts, i, u), dtype=float)
            m2 = max(m2, float(np.max(np.abs(f_iu) / poly)))
        for j in range(1, m + 1):
            c_ij = np.asarray(spec.switch_cost(pts, i, j), dtype=float)
            m2 = max(m2, float(np.max(np.abs(c_ij) / poly)))
            if i != j and nonneg_ok and np.any(c_ij < 0):
                nonneg_ok = False
                k = int(np.argmax(c_ij < 0))
                nonneg_witness = (tuple(pts[k]), i, j)
            if i == j and diag_ok and np.any(c_ij != 0):
                diag_ok = False
                k = int(np.argmax(c_ij != 0))
                diag_witness = (tuple(pts[k]), i)
    checks["switch_cost_nonnegative"] = AssumptionCheck(
        "switch_cost_nonnegative", passed=nonneg_ok,
        detail="" if nonneg_ok else "negative cost sampled",
        witness=nonneg_witness,
    )
    checks["switch_cost_zero_diagonal"] = AssumptionCheck(
        "switch_cost_zero_diagonal", passed=diag_ok,
        detail="" if diag_ok else "self-switch cost is nonzero",
        witness=diag_witness,
    )
    checks["reward_polynomial_growth"] = AssumptionCheck(
        "reward_polynomial_growth",
        passed=bool(np.isfinite(m2)),
        detail=f"growth constant {m2:.6g} at exponent {spec.growth_exp:g}",
        constant=m2,
    )

    # Terminal consistency: switching at the horizon can never gain.
    term_ok, term_witness = True, None
    g_all = np.stack(
        [np.asarray(spec.terminal_payoff(pts, i), dtype=float) for i in range(1, m + 1)]
    )
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            if j == i:
                continue
            gain = g_all[j - 1] - np.asarray(spec.switch_cost(pts, i, j), dtype=float)
            bad = gain > g_all[i - 1] + 1e-12
            if term_ok and np.any(bad):
                term_ok = False
                k = int(np.argmax(bad))
                term_witness = (tuple(pts[k]), i, j)
    checks["terminal_no_switch_gain"] = AssumptionCheck(
        "terminal_no_switch_gain", passed=term_ok,
        detail="" if term_ok else "terminal payoff improvable by a switch",
        witness=term_witness,
    )

    loop_ok, loop_witness = True, None
    for k in range(pts.shape[0]):
        ok, cycle = no_free_loop(spec.cost_matrix(pts[k]))
        if not ok:
            loop_ok = False
            loop_witness = (tuple(pts[k]), cycle)
            break
    checks["no_free_loop"] = AssumptionCheck(
        "no_free_loop", passed=loop_ok,
        detail="" if loop_ok else f"zero-cost cycle {loop_witness[1]}",
        witness=loop_witness,
    )

    return ValidationReport(
        checks=checks,
        sample_points=pts,
        lipschitz=lip,
        drift_growth=m1,
        reward_growth=m2,
    )


def growth_envelope(spec: ProblemSpec, report: ValidationReport) -> GrowthBounds:
    """Assemble the exponential lower envelope from sampled constants.

    The scale is taken large enough that ``scale * (1 + |x|^q)`` dominates the
    sampled terminal payoff (so the envelope starts below it) and also covers
    the reward accumulated over the horizon.  The rate is the smallest value
    whose product with the scale dominates the composite constant

        2 * M2  +  2 * scale * Mh * M1  +  2 * scale * Mh * M1**2

    collecting the running-reward, gradient-drift, and Hessian-diffusion
    contributions, with ``Mh = q * (q - 1)`` bounding the derivatives of
    ``|x|^q`` against ``|x|^(q-1)`` and ``|x|^(q-2)``.
    """
    if not (np.isfinite(report.lipschitz) and np.isfinite(report.drift_growth)
            and np.isfinite(report.reward_growth)):
        raise EstimationError("sampled growth constants are not finite")
    p = float(spec.growth_exp)
    q = max(4.0, p)
    pts = report.sample_points
    radius = np.linalg.norm(pts, axis=1)
    poly_q = 1.0 + radius ** q

    g_ratio = 0.0
    for i in range(1, spec.regimes + 1):
        g_i = np.asarray(spec.terminal_payoff(pts, i), dtype=float)
        if not np.all(np.isfinite(g_i)):
            raise EstimationError("terminal payoff not finite on samples")
        g_ratio = max(g_ratio, float(np.max(np.abs(g_i) / poly_q)))

    m1, m2 = report.drift_growth, report.reward_growth
    scale = max(1.0, g_ratio, m2 * (1.0 + spec.horizon))
    mh = q * (q - 1.0)
    composite = 2.0 * m2 + 2.0 * scale * mh * m1 + 2.0 * scale * mh * m1 ** 2
    rate = composite / scale

    bounds = GrowthBounds(
        lipschitz=report.lipschitz,
        drift_growth=m1,
        reward_growth=m2,
        growth_exp=p,
        envelope_exp=q,
        scale=scale,
        rate=rate,
        composite=composite,
        horizon=spec.horizon,
    )

    # Terminal subsolution property must hold on the samples by construction.
    terminal = bounds.envelope(spec.horizon, pts)
    for i in range(1, spec.regimes + 1):
        g_i = np.asarray(spec.terminal_payoff(pts, i), dtype=float)
        if np.any(terminal > g_i + 1e-9):
            raise EstimationError("envelope exceeds the terminal payoff on samples")
    return bounds
