"""CSV export of solved fields, trajectories, and game-condition reports.

All floats are written with 17 significant digits and a '.' decimal
separator so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "write_value_policy_csv",
    "write_trajectory_csv",
    "write_isaacs_csv",
]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_value_policy_csv(path, value_field, policy_field=None, regime_labels=None):
    """Rows ordered time-major, then lexicographic node index, then regime."""
    grid = value_field.grid
    d = grid.dim
    nt = value_field.values.shape[0] - 1
    m = value_field.values.shape[1]
    labels = regime_labels if regime_labels is not None else list(range(1, m + 1))
    times = grid.times()
    nodes = grid.nodes()
    n_nodes = nodes.shape[0]
    header = ["t"] + [f"x_{k + 1}" for k in range(d)] + [
        "regime", "value", "action", "switch_target", "adversary_control",
    ]
    vals = value_field.values.reshape(nt + 1, m, n_nodes)
    if policy_field is not None:
        sw = policy_field.switch_to.reshape(nt + 1, m, n_nodes)
        ci = policy_field.control_index.reshape(nt + 1, m, n_nodes)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(nt + 1):
            t_str = _fmt(times[k])
            for q in range(n_nodes):
                xs = ",".join(_fmt(c) for c in nodes[q])
                for ii in range(m):
                    if policy_field is not None:
                        target = int(sw[k, ii, q])
                        action = "STAY" if target == 0 else "SWITCH"
                        tgt_str = "" if target == 0 else str(target)
                        ctrl = _fmt(policy_field.control_set[int(ci[k, ii, q])])
                    else:
                        action, tgt_str, ctrl = "STAY", "", ""
                    fh.write(
                        f"{t_str},{xs},{labels[ii]},{_fmt(vals[k, ii, q])},"
                        f"{action},{tgt_str},{ctrl}\n"
                    )


def write_trajectory_csv(path, record):
    d = record.states.shape[1]
    header = ["t"] + [f"x_{k + 1}" for k in range(d)] + [
        "regime", "control", "cum_running_cost", "cum_switch_cost",
    ]
    n = len(record.times)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            ctrl = record.controls[min(k, len(record.controls) - 1)] if record.controls else ""
            xs = ",".join(_fmt(c) for c in record.states[k])
            fh.write(
                f"{_fmt(record.times[k])},{xs},{int(record.regimes[k])},"
                f"{_fmt(ctrl) if ctrl != '' else ''},"
                f"{_fmt(record.cum_running[k])},{_fmt(record.cum_switch[k])}\n"
            )


def write_isaacs_csv(path, report):
    with open(path, "w", newline="") as fh:
        fh.write("p,lower,upper,gap\n")
        p = np.atleast_1d(report.p_samples)
        for k in range(p.shape[0]):
            row = p[k]
            p_str = _fmt(row) if np.ndim(row) == 0 else ";".join(_fmt(c) for c in row)
            fh.write(
                f"{p_str},{_fmt(report.lower[k])},{_fmt(report.upper[k])},"
                f"{_fmt(report.gap[k])}\n"
            )
