"""Command-line entry point.

Subcommands:
    solve <bench>               solve and export the value/policy CSV
    simulate <bench>            Monte Carlo payoff of a strategy/adversary pair
    verify <bench>              solve + reference checks, pass/fail table
    check-assumptions <bench>   sampled assumption report (benchmark or config)
    isaacs <bench>              max-min vs min-max Hamiltonian report
    list                        registry dump

Benchmarks may be referenced by registry name or by a key-value config path.
Runs are deterministic for fixed arguments: the seed defaults to a constant
and CSV output is byte-stable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import benchmarks as bm
from .config import load_config
from .csvio import write_isaacs_csv, write_trajectory_csv, write_value_policy_csv
from .errors import SwitchGameError
from .grid import build_grid
from .hjb import residual_check, solve, terminal_error
from .isaacs import LOWER, UPPER, isaacs_check, solve_isaacs
from .problem import growth_envelope, validate_spec
from .simulate import (
    AdversaryControl,
    FeedbackSwitchingStrategy,
    best_response_adversary,
    dpp_check,
    estimate_J,
    sandwich_check,
    simulate_path,
)

DEFAULT_SEED = 12345
DEFAULT_P_SAMPLES = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("SWITCHGAME_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_problem(target):
    """Benchmark name or config path -> (spec, grid kwargs, benchmark or None)."""
    if target in bm.benchmark_names():
        bench = bm.get_benchmark(target)
        return bench.spec, dict(bounds=bench.bounds, nx=bench.nx,
                                nt_hint=bench.nt_hint), bench
    path = Path(target)
    if path.exists():
        spec, grid_kwargs = load_config(path)
        return spec, grid_kwargs, None
    bm.get_benchmark(target)  # raises with the registered names listed


def _grid_for(spec, grid_kwargs, args):
    kw = dict(grid_kwargs)
    if getattr(args, "nx", None):
        kw["nx"] = args.nx
    if getattr(args, "nt", None):
        kw["nt_hint"] = args.nt
    if getattr(args, "bounds", None):
        lo, hi = (float(v) for v in args.bounds.split(":"))
        kw["bounds"] = (lo, hi)
    return build_grid(spec, kw["bounds"], kw["nx"], kw["nt_hint"])


def _cmd_solve(args) -> int:
    spec, grid_kwargs, _ = _load_problem(args.bench)
    grid = _grid_for(spec, grid_kwargs, args)
    field, policy = solve(spec, grid)
    out = _out_dir(args) / f"{spec.name}_values.csv"
    write_value_policy_csv(out, field, policy)
    res = field.residual
    print(f"solved {spec.name}: nx={grid.nx} nt={grid.nt} dt={grid.dt:.6g}")
    if res is not None:
        print(
            f"complementarity residual: max={res.max_abs:.3e} "
            f"mean={res.mean_abs:.3e} tol={res.tolerance:.3e} "
            f"({'ok' if res.passed else 'EXCEEDED'})"
        )
    print(f"wrote {out}")
    return 0


def _make_strategy(args, spec, field, policy):
    name = args.strategy
    if name == "value":
        return FeedbackSwitchingStrategy.value_driven(field, policy)
    if name == "never":
        return FeedbackSwitchingStrategy.never_switch()
    if name == "scripted:zeno":
        return FeedbackSwitchingStrategy.zeno_alternation()
    if name.startswith("scripted:match"):
        return None  # resolved after the adversary exists
    raise SwitchGameError(f"unknown strategy {name!r}")


def _make_adversary(args, spec, policy):
    name = args.adversary
    if name == "best":
        return best_response_adversary(policy)
    if name.startswith("constant:"):
        raw = name.split(":", 1)[1]
        try:
            u = int(raw)
        except ValueError:
            u = float(raw)
        return AdversaryControl.constant(spec, u)
    if name.startswith("step:"):
        path = Path(name.split(":", 1)[1])
        knots, values = [], []
        for line in path.read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            t_str, u_str = line.split()
            knots.append(float(t_str))
            try:
                values.append(int(u_str))
            except ValueError:
                values.append(float(u_str))
        return AdversaryControl.step(spec, knots, values)
    raise SwitchGameError(f"unknown adversary {name!r}")


def _cmd_simulate(args) -> int:
    spec, grid_kwargs, bench = _load_problem(args.bench)
    need_solve = args.strategy == "value" or args.adversary == "best"
    field = policy = None
    if need_solve:
        grid = _grid_for(spec, grid_kwargs, args)
        field, policy = solve(spec, grid)
    adversary = _make_adversary(args, spec, policy)
    strategy = _make_strategy(args, spec, field, policy)
    if strategy is None:
        strategy = FeedbackSwitchingStrategy.match_step_control(adversary)
    x0 = args.x0
    if x0 is None:
        lo, hi = grid_kwargs["bounds"]
        x0 = 0.5 * (lo + hi)
    est = estimate_J(
        spec, strategy, adversary, args.s0, np.array([x0]), args.regime,
        args.dt, args.paths, args.seed, n_workers=args.threads,
    )
    print(str(est))
    if est.zeno_failures:
        print(f"aborted paths (switch cap): {est.zeno_failures}")
    if args.trajectory_out:
        rec = simulate_path(
            spec, strategy, adversary, args.s0, np.array([x0]), args.regime,
            args.dt, args.seed, path_index=0,
        )
        write_trajectory_csv(args.trajectory_out, rec)
        print(f"wrote {args.trajectory_out}")
    return 0


def _verify_rows(bench):
    spec = bench.spec
    grid = build_grid(spec, bench.bounds, bench.nx, bench.nt_hint)
    rows = []
    t0 = time.perf_counter()
    field, policy = solve(spec, grid)
    rows.append(("solve", True,
                 f"nt={grid.nt}, {time.perf_counter() - t0:.2f}s"))

    lo, hi = bench.interior
    x = grid.axes[0]
    window = (x >= lo) & (x <= hi)
    if bench.analytic is not None:
        worst = 0.0
        for i in range(1, spec.regimes + 1):
            exact = np.array([bench.analytic(0.0, xi, i) for xi in x[window]])
            got = field.values[0, i - 1][window]
            worst = max(worst, float(np.max(np.abs(got - exact))))
        rows.append(("analytic value", worst <= bench.tolerance,
                     f"max err {worst:.2e} tol {bench.tolerance:.0e}"))
    if bench.analytic_upper is not None:
        upper = solve_isaacs(spec, grid, UPPER)
        exact = np.array([bench.analytic_upper(0.0, xi, 1) for xi in x[window]])
        got = upper.values[0, 0][window]
        worst = float(np.max(np.abs(got - exact)))
        rows.append(("upper game value", worst <= bench.tolerance,
                     f"max err {worst:.2e} tol {bench.tolerance:.0e}"))

    res = residual_check(field, spec, grid)
    rows.append(("complementarity residual", res.passed,
                 f"max {res.max_abs:.2e} tol {res.tolerance:.2e}"))
    term = terminal_error(field, spec, grid)
    rows.append(("terminal layer", term == 0.0, f"max err {term:.2e}"))
    dev = dpp_check(spec, grid, field, max(1, grid.nt // 2))
    rows.append(("restart consistency", dev == 0.0, f"deviation {dev:.2e}"))

    strategy = FeedbackSwitchingStrategy.value_driven(field, policy)
    x0 = bench.default_x0()
    span = spec.horizon
    knots = [k * span / bench.mc_knots for k in range(bench.mc_knots)]
    report = sandwich_check(
        spec, grid, field, strategy, 0.0, np.array([x0]), 1,
        knot_grid=knots, dt_sim=bench.mc_dt, n_paths=bench.mc_paths,
        seed=DEFAULT_SEED,
    )
    rows.append(("achievable lower proxy", report.passed,
                 f"proxy {report.lower_proxy:.4g} vs grid {report.grid_value:.4g} "
                 f"(+{report.tolerance:.2g})"))
    return rows


def _cmd_verify(args) -> int:
    bench = bm.get_benchmark(args.bench)
    rows = _verify_rows(bench)
    width = max(len(r[0]) for r in rows)
    ok = True
    print(f"verify {bench.name}")
    for name, passed, detail in rows:
        ok &= passed
        print(f"  {name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}")
    print("result:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def _cmd_check_assumptions(args) -> int:
    spec, grid_kwargs, bench = _load_problem(args.bench)
    lo, hi = grid_kwargs["bounds"]
    samples = np.linspace(lo, hi, 33)[:, None]
    report = validate_spec(spec, samples)
    width = max(len(n) for n in report.checks)
    print(f"assumptions for {spec.name}")
    for name, check in report.checks.items():
        print(f"  {name:<{width}}  {'PASS' if check.passed else 'FAIL'}  {check.detail}")
    try:
        env = growth_envelope(spec, report)
        print(
            f"growth envelope: scale={env.scale:.4g} rate={env.rate:.4g} "
            f"exponent={env.envelope_exp:g}"
        )
    except SwitchGameError as exc:
        print(f"growth envelope unavailable: {exc}")

    if bench is not None:
        expected = bench.assumption_profile
    else:
        expected = {name: True for name in report.checks}
        if spec.allow_zero_cost_loops:
            expected["no_free_loop"] = False
    unexpected = [
        name for name, check in report.checks.items()
        if not check.passed and expected.get(name, True)
    ]
    if unexpected:
        print("unexpected violations:", ", ".join(unexpected))
        return 1
    return 0


def _cmd_isaacs(args) -> int:
    spec, _, _ = _load_problem(args.bench)
    if args.p_range:
        if ":" in args.p_range:
            lo, hi, n = args.p_range.split(":")
            p = np.linspace(float(lo), float(hi), int(n))
        else:
            p = np.array([float(v) for v in args.p_range.split(",")])
    else:
        p = np.array(DEFAULT_P_SAMPLES)
    report = isaacs_check(spec, p)
    out = _out_dir(args) / f"{spec.name}_isaacs.csv"
    write_isaacs_csv(out, report)
    print(
        f"max-min/min-max gap: max={report.max_gap:.6g} "
        f"{'holds' if report.holds else 'FAILS'} (tol {report.tolerance:.0e})"
    )
    print(f"wrote {out}")
    return 0


def _cmd_list(args) -> int:
    for name in bm.benchmark_names():
        bench = bm.get_benchmark(name)
        spec = bench.spec
        print(
            f"{name}: d={spec.dimension} m={spec.regimes} T={spec.horizon:g} "
            f"controls={spec.control_set} analytic={'yes' if bench.analytic else 'no'}"
            f" [{bench.provenance}]"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchgame",
        description="Worst-case optimal switching: solver, simulator, checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("solve", help="solve a benchmark and export CSV")
    p.add_argument("bench")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--nt", type=int, default=None)
    p.add_argument("--bounds", default=None, help="lo:hi")
    add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo payoff estimate")
    p.add_argument("bench")
    p.add_argument("--strategy", default="value",
                   help="value | never | scripted:zeno | scripted:match")
    p.add_argument("--adversary", default="best",
                   help="best | constant:<u> | step:<file>")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--dt", type=float, default=1.0 / 256.0)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--regime", type=int, default=1)
    p.add_argument("--s0", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trajectory-out", default=None)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--nt", type=int, default=None)
    p.add_argument("--bounds", default=None)
    add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="solve and run the reference checks")
    p.add_argument("bench")
    add_common(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("check-assumptions", help="sampled assumption report")
    p.add_argument("bench")
    add_common(p)
    p.set_defaults(func=_cmd_check_assumptions)

    p = sub.add_parser("isaacs", help="max-min vs min-max Hamiltonian report")
    p.add_argument("bench")
    p.add_argument("--p-range", default=None,
                   help="comma list of slopes or lo:hi:n")
    add_common(p)
    p.set_defaults(func=_cmd_isaacs)

    p = sub.add_parser("list", help="dump the benchmark registry")
    add_common(p)
    p.set_defaults(func=_cmd_list)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (SwitchGameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
