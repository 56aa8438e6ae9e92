"""Key-value problem configuration files.

A config selects a registered coefficient family and supplies numbers:

    family = regime_chase
    horizon = 1.0
    regimes = 2
    controls = 1, 2
    bounds = -2, 2
    nx = 201
    nt = 200
    cost = 0
    allow_zero_cost_loops = true

``cost`` is either one number (uniform off-diagonal cost) or ``m * m``
row-major entries with a zero diagonal.  Lines starting with ``#`` are
comments.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .problem import ProblemSpec

__all__ = ["load_config", "parse_config_text", "FAMILIES"]


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _parse_value(value)
    return out


def _parse_value(value: str):
    if "," in value:
        return [_parse_scalar(v.strip()) for v in value.split(",") if v.strip()]
    return _parse_scalar(value)


def _parse_scalar(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


def _cost_fn(entries, m):
    entries = _as_list(entries)
    if len(entries) == 1:
        mat = np.full((m, m), float(entries[0]))
        np.fill_diagonal(mat, 0.0)
    elif len(entries) == m * m:
        mat = np.asarray(entries, dtype=float).reshape(m, m)
        if np.any(np.diag(mat) != 0):
            raise ConfigurationError("cost matrix diagonal must be zero")
    else:
        raise ConfigurationError(f"cost needs 1 or {m * m} entries")
    if np.any(mat < 0):
        raise ConfigurationError("cost entries must be nonnegative")

    def cost(x, i, j):
        return np.full(x.shape[0], mat[i - 1, j - 1])

    return cost


def _zero_vec(x, i, u):
    return np.zeros_like(x)


def _zero_mat(x, i, u):
    return np.zeros((x.shape[0], 1, 1))


def _zero_scalar(x, *args):
    return np.zeros(x.shape[0])


def _family_regime_chase(cfg, m, controls):
    scale = float(cfg.get("drift_scale", 1.0))

    def drift(x, i, u):
        return np.full((x.shape[0], 1), -scale * abs(i - u), dtype=float)

    def payoff(x, i):
        return np.array(x[:, 0], dtype=float)

    return dict(drift=drift, diffusion=_zero_mat, running_cost=_zero_scalar,
                terminal_payoff=payoff, growth_exp=1.0)


def _family_no_dynamics(cfg, m, controls):
    slopes = [float(v) for v in _as_list(cfg.get("payoff_slopes", 1.0))]
    if len(slopes) == 1:
        slopes = slopes * m
    if len(slopes) != m:
        raise ConfigurationError("payoff_slopes needs one entry per regime")

    def payoff(x, i):
        return slopes[i - 1] * x[:, 0]

    return dict(drift=_zero_vec, diffusion=_zero_mat, running_cost=_zero_scalar,
                terminal_payoff=payoff, growth_exp=1.0)


def _family_constant_diffusion(cfg, m, controls):
    sigma = float(cfg.get("sigma", 1.0))

    def diffusion(x, i, u):
        return np.full((x.shape[0], 1, 1), sigma)

    def payoff(x, i):
        return x[:, 0] ** 2

    return dict(drift=_zero_vec, diffusion=diffusion, running_cost=_zero_scalar,
                terminal_payoff=payoff, growth_exp=2.0)


def _family_regime_reward(cfg, m, controls):
    rates = [float(v) for v in _as_list(cfg.get("reward_rates", 0.0))]
    if len(rates) == 1:
        rates = rates * m
    if len(rates) != m:
        raise ConfigurationError("reward_rates needs one entry per regime")

    def running(x, i, u):
        return np.full(x.shape[0], rates[i - 1])

    return dict(drift=_zero_vec, diffusion=_zero_mat, running_cost=running,
                terminal_payoff=_zero_scalar, growth_exp=1.0)


FAMILIES = {
    "regime_chase": _family_regime_chase,
    "no_dynamics": _family_no_dynamics,
    "constant_diffusion": _family_constant_diffusion,
    "regime_reward": _family_regime_reward,
}


def load_config(path):
    """Read a config file; returns ``(spec, grid_kwargs)``."""
    cfg = parse_config_text(Path(path).read_text())
    family = cfg.get("family")
    if family not in FAMILIES:
        raise ConfigurationError(
            f"unknown family {family!r}; available: {', '.join(sorted(FAMILIES))}"
        )
    m = int(cfg.get("regimes", 1))
    controls = tuple(_as_list(cfg.get("controls", [0.0])))
    pieces = FAMILIES[family](cfg, m, controls)
    spec = ProblemSpec(
        name=str(cfg.get("name", family)),
        dimension=1,
        horizon=float(cfg.get("horizon", 1.0)),
        regimes=m,
        control_set=controls,
        switch_cost=_cost_fn(cfg.get("cost", 0.0), m),
        allow_zero_cost_loops=bool(cfg.get("allow_zero_cost_loops", False)),
        **pieces,
    )
    bounds = [float(v) for v in _as_list(cfg.get("bounds", [-2.0, 2.0]))]
    if len(bounds) != 2:
        raise ConfigurationError("bounds needs exactly two entries")
    grid_kwargs = dict(
        bounds=(bounds[0], bounds[1]),
        nx=int(cfg.get("nx", 201)),
        nt_hint=int(cfg.get("nt", 100)),
    )
    return spec, grid_kwargs
