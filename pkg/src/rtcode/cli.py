"""Command-line front end: solves, sweeps, region scans, checks, simulation.

Output is machine-readable only: JSON reports on standard output, CSV
streams with the fixed header ``p,delta,d,m,quantity,value,flags``.  All
floats are printed with 12 significant digits, and rows appear in
lexicographic parameter order regardless of the worker-pool size, so
repeated runs are byte-identical.

Exit codes: 0 success, 1 numerical non-convergence (flagged rows),
2 usage or validation problems.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .baselines import (d0_distortion, shannon_limit, suboptimality_region,
                        symbol_by_symbol_check, uncoded_condition_check)
from .errors import (CapacityError, NonConvergenceError, SpecValidationError,
                     UnreachableObservationError)
from .models import (ProblemSpec, bernoulli_source, binary_problem, bsc,
                     hamming, load_spec, validate, with_budget)
from .scenarios import (memory_last_m, solve_feedback_complete,
                        solve_feedback_finite, solve_nofeedback)
from .simplex import simplex_grid
from .simulate import PolicyBundle, simulate
from .vending import solve_vending_feedback, solve_vending_nofeedback

CSV_HEADER = "p,delta,d,m,quantity,value,flags"
SWEEP_QUANTITIES = ("D0", "Dinf", "Ddm", "Dvend")


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _round_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(_round_floats(obj), indent=2) + "\n")


def _usage(msg: str):
    raise SpecValidationError([msg])


def _parse_source(token: str):
    kind, _, arg = token.partition(":")
    if kind == "bernoulli" and arg:
        return bernoulli_source(float(arg))
    _usage(f"unknown source {token!r}; expected bernoulli:<p>")


def _parse_channel(token: str):
    kind, _, arg = token.partition(":")
    if kind == "bsc" and arg:
        return bsc(float(arg))
    _usage(f"unknown channel {token!r}; expected bsc:<delta>")


def _parse_distortion(token: str):
    kind, _, arg = token.partition(":")
    if kind == "hamming":
        return hamming(int(arg) if arg else 2)
    _usage(f"unknown distortion {token!r}; expected hamming[:n]")


def _parse_memory(token: str):
    """Returns ('last', m) or ('complete', None)."""
    if token == "complete":
        return "complete", None
    kind, _, arg = token.partition(":")
    if kind == "last" and arg:
        m = int(arg)
        if m < 0:
            _usage(f"memory length {m} must be nonnegative")
        return "last", m
    _usage(f"unknown memory {token!r}; expected last:<m> or complete")


def _parse_last_memory(token: str, what: str) -> int:
    kind, m = _parse_memory(token)
    if kind != "last":
        _usage(f"{what} supports only last:<m> memories")
    return m


def _attach_vending(spec: ProblemSpec, path: str) -> ProblemSpec:
    from .models import spec_from_dict

    with open(path, "r", encoding="utf-8") as fh:
        block = json.load(fh)
    merged = {
        "source": [float(v) for v in spec.source.p],
        "channel": [[float(v) for v in row] for row in spec.channel.rows],
        "distortion": [[float(v) for v in row] for row in spec.distortion.loss],
        "vending": block,
    }
    return spec_from_dict(merged)


def _build_spec(args) -> ProblemSpec:
    if args.spec:
        spec = load_spec(args.spec)
    else:
        missing = [name for name in ("source", "channel", "distortion")
                   if getattr(args, name) is None]
        if missing:
            _usage("missing " + ", ".join(f"--{m}" for m in missing)
                   + " (or use --spec)")
        spec = ProblemSpec(
            _parse_source(args.source),
            _parse_channel(args.channel),
            _parse_distortion(args.distortion),
        )
    if getattr(args, "vending", None):
        spec = _attach_vending(spec, args.vending)
    if getattr(args, "budget", None) is not None:
        spec = with_budget(spec, args.budget)
    problems = validate(spec)
    if problems:
        raise SpecValidationError(problems)
    return spec


def _need_grid(args) -> int:
    if args.grid is None:
        _usage("this scenario needs --grid <resolution>")
    if args.grid < 1:
        _usage(f"grid resolution {args.grid} must be at least 1")
    return args.grid


def _solve_report(args):
    """Shared solve dispatch; returns (report, spec)."""
    spec = _build_spec(args)
    d = args.d
    if d < 0:
        _usage(f"lookahead {d} must be nonnegative")
    if spec.vending is not None:
        mem_x = memory_last_m(_parse_last_memory(args.memory_x, "--memory-x"),
                              spec.num_channel_inputs)
        mem_y = memory_last_m(_parse_last_memory(args.memory_y, "--memory-y"),
                              spec.num_channel_outputs)
        if args.no_feedback:
            report = solve_vending_nofeedback(
                spec, d, mem_x, mem_y, _need_grid(args), rvi_tol=args.tol,
            )
        else:
            report = solve_vending_feedback(
                spec, d, mem_x, mem_y, rvi_tol=args.tol,
            )
        return report, spec
    kind, m = _parse_memory(args.memory)
    if kind == "complete":
        if args.no_feedback:
            _usage("--memory complete is a feedback scenario; "
                   "drop --no-feedback or use --memory last:<m>")
        report = solve_feedback_complete(spec, d, _need_grid(args),
                                         tol=args.tol)
        return report, spec
    memory = memory_last_m(m, spec.num_channel_outputs)
    if args.no_feedback:
        report = solve_nofeedback(spec, d, memory, _need_grid(args),
                                  tol=args.tol)
    else:
        report = solve_feedback_finite(spec, d, memory, tol=args.tol)
    return report, spec


def cmd_solve(args) -> int:
    report, _ = _solve_report(args)
    _emit_json(report.to_dict())
    return 0


def _parse_range(token: str) -> list[float]:
    parts = token.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        _usage(f"bad range {token!r}; expected start:stop:step")
    a, b, s = (float(v) for v in parts)
    if s <= 0:
        _usage(f"range step must be positive in {token!r}")
    n = int(math.floor((b - a) / s + 1e-9)) + 1
    return [a + k * s for k in range(max(n, 0))]


def _parse_assign(token: str, what: str) -> tuple[str, str]:
    name, sep, value = token.partition("=")
    if not sep or name not in ("p", "delta"):
        _usage(f"bad {what} {token!r}; expected p=... or delta=...")
    return name, value


def _sweep_task(task: dict):
    """One sweep cell; returns (value, flags tuple).  Must stay a plain
    module function so worker processes can import it."""
    spec = binary_problem(task["p"], task["delta"])
    try:
        quantity = task["quantity"]
        if quantity == "D0":
            value, _ = d0_distortion(spec)
            return value, ()
        if quantity == "Dinf":
            return shannon_limit(spec), ()
        if quantity == "Ddm":
            memory = memory_last_m(task["m"], spec.num_channel_outputs)
            if task["nofeedback"]:
                report = solve_nofeedback(spec, task["d"], memory,
                                          task["grid"], tol=task["tol"])
            else:
                report = solve_feedback_finite(spec, task["d"], memory,
                                               tol=task["tol"])
            return report.distortion, report.flags
        spec = with_budget(
            _attach_vending(spec, task["vending"]), task["budget"],
        ) if task["budget"] is not None else _attach_vending(
            spec, task["vending"])
        mem_x = memory_last_m(task["mem_x"], spec.num_channel_inputs)
        mem_y = memory_last_m(task["mem_y"], spec.num_channel_outputs)
        if task["nofeedback"]:
            report = solve_vending_nofeedback(spec, task["d"], mem_x, mem_y,
                                              task["grid"],
                                              rvi_tol=task["tol"])
        else:
            report = solve_vending_feedback(spec, task["d"], mem_x, mem_y,
                                            rvi_tol=task["tol"])
        return report.distortion, report.flags
    except NonConvergenceError:
        return float("nan"), ("NONCONVERGED",)


def cmd_sweep(args) -> int:
    quantities = args.quantities.split(",")
    for q in quantities:
        if q not in SWEEP_QUANTITIES:
            _usage(f"unknown quantity {q!r}; choose from "
                   + ",".join(SWEEP_QUANTITIES))
    fix_name, fix_value = _parse_assign(args.fix, "--fix")
    vary_name, vary_range = _parse_assign(args.vary, "--vary")
    if fix_name == vary_name:
        _usage("--fix and --vary must name different parameters")
    fixed = float(fix_value)
    varied = _parse_range(vary_range)
    m_list = [int(v) for v in args.m.split(",")] if args.m else [0]
    if "Dvend" in quantities and not args.vending:
        _usage("quantity Dvend needs --vending <file>")
    if args.no_feedback and args.grid is None:
        _usage("--no-feedback needs --grid <resolution>")

    cells = []
    for q in quantities:
        if q == "D0" or q == "Dinf":
            cells.append((q, None, None))
        elif q == "Ddm":
            cells.extend((q, args.d, m) for m in m_list)
        else:
            cells.append((q, args.d, None))

    rows = []
    for value in varied:
        p = value if vary_name == "p" else fixed
        delta = value if vary_name == "delta" else fixed
        for q, d, m in cells:
            rows.append({
                "quantity": q, "p": p, "delta": delta, "d": d, "m": m,
                "tol": args.tol, "grid": args.grid,
                "nofeedback": args.no_feedback,
                "vending": args.vending, "budget": args.budget,
                "mem_x": _parse_last_memory(args.memory_x, "--memory-x"),
                "mem_y": _parse_last_memory(args.memory_y, "--memory-y"),
            })
    rows.sort(key=lambda r: (
        r["p"], r["delta"],
        (0, 0) if r["d"] is None else (1, r["d"]),
        (0, 0) if r["m"] is None else (1, r["m"]),
        r["quantity"],
    ))

    if args.workers > 1 and rows:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_task, rows))
    else:
        results = [_sweep_task(r) for r in rows]

    sys.stdout.write(CSV_HEADER + "\n")
    nonconverged = False
    for row, (value, flags) in zip(rows, results):
        nonconverged = nonconverged or "NONCONVERGED" in flags
        sys.stdout.write(",".join([
            _fmt(row["p"]), _fmt(row["delta"]),
            "" if row["d"] is None else str(row["d"]),
            "" if row["m"] is None else str(row["m"]),
            row["quantity"], _fmt(value), ";".join(flags),
        ]) + "\n")
    return 1 if nonconverged else 0


def cmd_region(args) -> int:
    ps = _parse_range(args.p)
    deltas = _parse_range(args.delta)
    report = suboptimality_region(args.d, args.m, ps, deltas,
                                  margin=args.margin, tol=args.tol,
                                  workers=args.workers)
    errored = {(i, j) for i, j, _ in report.errors}
    lines = [CSV_HEADER]
    for i, p in enumerate(report.p_grid):
        for j, delta in enumerate(report.delta_grid):
            bad = (i, j) in errored
            value = float("nan") if bad else float(bool(report.flags[i, j]))
            lines.append(",".join([
                _fmt(p), _fmt(delta), str(args.d), str(args.m),
                "region_flag", _fmt(value),
                "NONCONVERGED" if bad else "",
            ]))
    text = "\n".join(lines) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    flagged = [
        (p, delta)
        for i, p in enumerate(report.p_grid)
        for j, delta in enumerate(report.delta_grid)
        if (i, j) not in errored and report.flags[i, j]
    ]
    summary = {
        "region_nonempty": bool(flagged),
        "count": len(flagged),
        "bounding_box": None if not flagged else {
            "p_min": min(p for p, _ in flagged),
            "p_max": max(p for p, _ in flagged),
            "delta_min": min(x for _, x in flagged),
            "delta_max": max(x for _, x in flagged),
        },
        "errors": len(report.errors),
    }
    _emit_json(summary)
    return 1 if report.errors else 0


def cmd_check_s2s(args) -> int:
    spec = _build_spec(args)
    n_states = spec.num_source_symbols ** (args.d + 1)
    grid = simplex_grid(n_states, _need_grid(args))
    checker = uncoded_condition_check if args.uncoded else symbol_by_symbol_check
    report = checker(spec, args.d, grid)
    violation = None
    if report.first_violation is not None:
        tup, belief, gap = report.first_violation
        violation = {"tuple": list(tup), "belief": list(belief), "gap": gap}
    _emit_json({
        "quantity": "s2s_check",
        "holds_on_grid": report.holds_on_grid,
        "first_violation": violation,
        "max_gap": report.max_gap,
        "max_identity_gap": report.max_identity_gap,
        "policy": list(report.policy.table),
        "points_checked": report.points_checked,
        "grid_resolution": args.grid,
    })
    return 0


def cmd_shannon(args) -> int:
    spec = _build_spec(args)
    _emit_json({
        "quantity": "Dinf",
        "value": shannon_limit(spec),
        "flags": [],
    })
    return 0


def cmd_simulate(args) -> int:
    report, spec = _solve_report(args)
    bundle = PolicyBundle.from_report(report)
    sim = simulate(bundle, spec, args.d, args.horizon, args.replications,
                   args.seed)
    _emit_json({"solve": report.to_dict(), "simulation": sim.to_dict()})
    return 0


def _add_problem_flags(sp, vending: bool = True) -> None:
    sp.add_argument("--source", help="bernoulli:<p>")
    sp.add_argument("--channel", help="bsc:<delta>")
    sp.add_argument("--distortion", help="hamming or hamming:<n>")
    sp.add_argument("--spec", help="problem description JSON file")
    if vending:
        sp.add_argument("--vending",
                        help="vending block JSON file (kernel, costs, budget)")
        sp.add_argument("--budget", type=float,
                        help="override the vending budget")


def _add_scenario_flags(sp) -> None:
    sp.add_argument("--d", type=int, default=0, help="encoder lookahead")
    sp.add_argument("--memory", default="last:0",
                    help="decoder memory: last:<m> or complete")
    sp.add_argument("--memory-x", default="last:0", dest="memory_x",
                    help="vending decoder memory over sent symbols")
    sp.add_argument("--memory-y", default="last:0", dest="memory_y",
                    help="vending decoder memory over side observations")
    sp.add_argument("--no-feedback", action="store_true", dest="no_feedback",
                    help="encoder never sees the channel output")
    sp.add_argument("--grid", type=int,
                    help="belief grid resolution for discretized scenarios")
    sp.add_argument("--tol", type=float, default=1e-9,
                    help="value-iteration span tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtcode",
        description="minimum expected distortion for real-time coding "
                    "with lookahead",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one scenario, print JSON")
    _add_problem_flags(sp)
    _add_scenario_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="CSV sweep over one parameter")
    _add_problem_flags(sp, vending=True)
    _add_scenario_flags(sp)
    sp.add_argument("--fix", required=True, help="e.g. delta=0.3")
    sp.add_argument("--vary", required=True, help="e.g. p=0:0.5:0.025")
    sp.add_argument("--quantities", required=True,
                    help="comma list from D0,Dinf,Ddm,Dvend")
    sp.add_argument("--m", default="0", help="comma list of memory sizes")
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("region",
                        help="scan where memoryful coding beats symbol maps")
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--p", required=True, help="range start:stop:step")
    sp.add_argument("--delta", required=True, help="range start:stop:step")
    sp.add_argument("--margin", type=float, default=1e-6)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--csv", help="write CSV here instead of stdout")
    sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    sp.set_defaults(func=cmd_region)

    sp = sub.add_parser("check-s2s",
                        help="symbol-by-symbol optimality check on a grid")
    _add_problem_flags(sp, vending=False)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--grid", type=int, help="belief grid resolution")
    sp.add_argument("--uncoded", action="store_true",
                    help="pin the identity symbol map")
    sp.set_defaults(func=cmd_check_s2s)

    sp = sub.add_parser("shannon", help="unlimited-lookahead distortion")
    _add_problem_flags(sp, vending=False)
    sp.set_defaults(func=cmd_shannon)

    sp = sub.add_parser("simulate", help="solve, then simulate the policy")
    _add_problem_flags(sp)
    _add_scenario_flags(sp)
    sp.add_argument("--horizon", type=int, default=100000)
    sp.add_argument("--replications", type=int, default=10)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if isinstance(code, int) else 2
    try:
        return args.func(args)
    except (SpecValidationError, CapacityError,
            UnreachableObservationError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    except NonConvergenceError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


def entry() -> None:
    sys.exit(main())
