"""Truncated tensor-product grid with an explicit-scheme step-size bound.

The time step must satisfy

    dt <= dx_min**2 / (d * max|sigma sigma^T| + dx_min * max|b| + eps)

with the matrix norm taken as Hilbert-Schmidt and the drift in the 1-norm,
both estimated by sampling the coefficients on the nodes.  This is exactly
the bound that keeps the upwind/central explicit update a monotone (positive
coefficient) scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .problem import ProblemSpec

__all__ = ["Grid", "build_grid", "cfl_time_step_bound"]

_EPS = 1e-12
_MAX_TIME_STEPS = 10_000_000
_MAX_CFL_SAMPLES = 4096


@dataclass(frozen=True, eq=False)
class Grid:
    """Spatial nodes, time layers, and derived spacings for one solve."""

    lo: tuple
    hi: tuple
    nx: tuple
    nt: int
    horizon: float
    dt_bound: float
    axes: tuple = field(init=False)
    dx: tuple = field(init=False)
    shape: tuple = field(init=False)
    dt: float = field(init=False)

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or len(self.lo) != len(self.nx):
            raise ValueError("bounds and nx must agree in dimension")
        for lo_k, hi_k in zip(self.lo, self.hi):
            if not (math.isfinite(lo_k) and math.isfinite(hi_k) and lo_k < hi_k):
                raise ValueError("bounds must be finite and strictly ordered")
        for n in self.nx:
            if n < 3:
                raise ValueError("need at least 3 points per dimension")
            if n % 2 == 0:
                raise ValueError("nx must be odd so the domain center is a node")
        if self.nt < 1:
            raise ValueError("need at least one time step")
        axes = tuple(
            np.linspace(lo_k, hi_k, n) for lo_k, hi_k, n in zip(self.lo, self.hi, self.nx)
        )
        object.__setattr__(self, "axes", axes)
        object.__setattr__(
            self, "dx", tuple((h - l) / (n - 1) for l, h, n in zip(self.lo, self.hi, self.nx))
        )
        object.__setattr__(self, "shape", tuple(self.nx))
        object.__setattr__(self, "dt", self.horizon / self.nt)

    @property
    def dim(self) -> int:
        return len(self.nx)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def nodes(self) -> np.ndarray:
        """All grid nodes as a (n_nodes, d) array in C (lexicographic) order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.nt + 1)

    def center_index(self) -> tuple:
        return tuple(n // 2 for n in self.nx)

    def point(self, index) -> np.ndarray:
        return np.array([ax[k] for ax, k in zip(self.axes, index)])

    def is_boundary(self, index) -> bool:
        return any(k == 0 or k == n - 1 for k, n in zip(index, self.nx))

    def nearest_time_index(self, t: float) -> int:
        # ties resolve to the lower index
        k = int(np.ceil(t / self.dt - 0.5))
        return min(max(k, 0), self.nt)

    def nearest_spatial_index(self, x, clamp_counter=None):
        """Nearest node of a batch of points, shape (n,) flat C-order indices.

        Points outside the bounds are clamped; if ``clamp_counter`` is a list
        its first entry is incremented by the number of clamped coordinates.
        """
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        flat = np.zeros(pts.shape[0], dtype=np.int64)
        clamped = 0
        for k in range(self.dim):
            q = (pts[:, k] - self.lo[k]) / self.dx[k]
            idx = np.ceil(q - 0.5).astype(np.int64)
            clamped += int(np.sum((idx < 0) | (idx > self.nx[k] - 1)))
            np.clip(idx, 0, self.nx[k] - 1, out=idx)
            flat = flat * self.nx[k] + idx
        if clamp_counter is not None and clamped:
            clamp_counter[0] += clamped
        return flat


def _coefficient_bounds(spec: ProblemSpec, nodes: np.ndarray):
    """Sampled sup of |b|_1 and |sigma sigma^T|_HS over nodes and (i, u)."""
    if nodes.shape[0] > _MAX_CFL_SAMPLES:
        stride = int(np.ceil(nodes.shape[0] / _MAX_CFL_SAMPLES))
        nodes = nodes[::stride]
    b_max, a_max = 0.0, 0.0
    for i in range(1, spec.regimes + 1):
        for u in spec.control_set:
            b = np.asarray(spec.drift(nodes, i, u), dtype=float)
            sig = np.asarray(spec.diffusion(nodes, i, u), dtype=float)
            a = np.einsum("nij,nkj->nik", sig, sig)
            b_max = max(b_max, float(np.max(np.sum(np.abs(b), axis=1))))
            a_max = max(a_max, float(np.max(np.sqrt(np.sum(a ** 2, axis=(1, 2))))))
    return b_max, a_max


def cfl_time_step_bound(dim: int, dx_min: float, b_max: float, a_max: float) -> float:
    return dx_min ** 2 / (dim * a_max + dx_min * b_max + _EPS)


def build_grid(spec: ProblemSpec, bounds, nx, nt_hint: int = 1) -> Grid:
    """Build a grid whose time step count honours the stability bound.

    ``bounds`` is a (lo, hi) pair (scalars in one dimension, sequences
    otherwise) and ``nx`` the odd per-dimension point count.  The number of
    time steps is raised above ``nt_hint`` until ``dt = T / nt`` satisfies
    the bound; an unattainable bound raises ``ConfigurationError``.
    """
    d = spec.dimension
    lo, hi = bounds
    lo = tuple(np.atleast_1d(np.asarray(lo, dtype=float)))
    hi = tuple(np.atleast_1d(np.asarray(hi, dtype=float)))
    if len(lo) == 1 and d > 1:
        lo, hi = lo * d, hi * d
    nx = tuple(np.atleast_1d(np.asarray(nx, dtype=int)))
    if len(nx) == 1 and d > 1:
        nx = nx * d

    probe = Grid(lo=lo, hi=hi, nx=nx, nt=max(1, int(nt_hint)), horizon=spec.horizon,
                 dt_bound=np.inf)
    b_max, a_max = _coefficient_bounds(spec, probe.nodes())
    bound = cfl_time_step_bound(d, min(probe.dx), b_max, a_max)

    nt = max(1, int(nt_hint))
    if spec.horizon / nt > bound:
        nt = max(nt, int(math.ceil(spec.horizon / bound)))
    while spec.horizon / nt > bound and nt <= _MAX_TIME_STEPS:
        nt += 1
    if spec.horizon / nt > bound:
        raise ConfigurationError(
            f"stability bound dt <= {bound:.3g} needs more than "
            f"{_MAX_TIME_STEPS} time steps"
        )
    return Grid(lo=lo, hi=hi, nx=nx, nt=nt, horizon=spec.horizon, dt_bound=bound)
