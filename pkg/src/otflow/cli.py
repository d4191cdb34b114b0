"""Command-line entry point: ``otflow {gen, solve, compare, verify, bench}``.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 sweep cap reached without convergence, 4 infeasible instance.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import oracle, sinkhorn_multi, sinkhorn_path
from ._scaling import InfeasibleError
from .diagnostics import mismatch_report, primal_objective
from .estimator import solve, solver_module
from .graph_model import ValidationError
from .problems import (
    GridSpec,
    MultiCommodityProblem,
    ProblemFormatError,
    RandomDenseSpec,
    TrafficSpec,
    check_problem,
    generate,
    load_with_warnings,
    save,
    to_dict,
    with_epsilon,
)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_INFEASIBLE = 0, 1, 2, 3, 4


class UsageError(Exception):
    """Bad flags or input file; exit code 2."""


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return value


# --------------------------------------------------------------------------- gen


def _summary(problem) -> str:
    return f"n={problem.n} L={problem.L} T={problem.T} epsilon={problem.epsilon:g}"


def cmd_gen(args) -> int:
    if args.scenario == "grid":
        if args.rows < 2 or args.cols < 2:
            raise UsageError("grid needs --rows >= 2 and --cols >= 2")
        spec = GridSpec(args.rows, args.cols, args.commodities, args.horizon, args.seed, args.epsilon)
    elif args.scenario == "random-dense":
        if args.vertices < 2 or not 0 < args.edge_prob <= 1:
            raise UsageError("random-dense needs --vertices >= 2 and 0 < --edge-prob <= 1")
        spec = RandomDenseSpec(args.vertices, args.edge_prob, args.commodities, args.horizon, args.seed,
                               args.epsilon)
    else:
        spec = TrafficSpec(args.horizon, args.truck_variant, args.epsilon, args.source_cost)
    if args.horizon < 2:
        raise UsageError("--horizon must be at least 2")
    problem = generate(spec)
    if args.out is None:
        sys.stdout.write(json.dumps(to_dict(problem), allow_nan=False, separators=(",", ":")) + "\n")
        print(_summary(problem), file=sys.stderr)
    else:
        save(problem, args.out)
        print(f"{args.out}: {_summary(problem)}")
    return EXIT_OK


# --------------------------------------------------------------------------- solve


def _load(path, epsilon=None):
    try:
        problem, notes = load_with_warnings(path)
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    for note in notes:
        print(f"warning: {path}: {note}", file=sys.stderr)
    if epsilon is not None:
        problem = with_epsilon(problem, epsilon)
    check_problem(problem)
    return problem


def _solution_doc(problem, state, report) -> dict:
    flows = solver_module(state).extract_flows(state)
    doc = flows.to_dict()
    doc["run"] = {
        "epsilon": problem.epsilon, "seed": problem.seed, "sweeps": report.sweeps,
        "converged": report.converged, "final_error": report.final_error,
        "primal": primal_objective(flows, problem),
    }
    return doc, flows


def cmd_solve(args) -> int:
    problem = _load(args.problem, args.epsilon)
    state, report = solve(problem, args.tol, args.max_sweeps)
    if args.no_timing:
        for rec in report.records:
            rec.seconds = 0.0
    if args.trace:
        report.to_csv(args.trace)
    doc, flows = _solution_doc(problem, state, report)
    if args.out:
        fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "json")
        if fmt == "csv":
            flows.to_csv(args.out)
        else:
            Path(args.out).write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    status = "converged" if report.converged else "not converged"
    print(f"{status} after {report.sweeps} sweeps: error={report.final_error:.3e} "
          f"primal={doc['run']['primal']:.10g}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# --------------------------------------------------------------------------- compare

COMPARE_COLUMNS = ("epsilon", "primal", "lp_optimum", "gap", "rel_gap", "eq_mismatch", "cap_violation",
                   "sweeps", "converged")


def cmd_compare(args) -> int:
    problem = _load(args.problem)
    try:
        lp = oracle.solve_exact_lp(problem)
    except oracle.OracleCapError as exc:
        raise UsageError(f"instance too large for the oracle: {exc}") from None
    rows = []
    for eps in args.eps:
        p = with_epsilon(problem, eps)
        state, report = solve(p, args.tol, args.max_sweeps)
        flows = solver_module(state).extract_flows(state)
        primal = primal_objective(flows, p)
        mm = mismatch_report(flows, p)
        gap = primal - lp.value
        rows.append({
            "epsilon": eps, "primal": primal, "lp_optimum": lp.value, "gap": gap,
            "rel_gap": gap / abs(lp.value) if lp.value else float("inf") if gap else 0.0,
            "eq_mismatch": max(mm["eq_source_rel"], mm["eq_sink_rel"]),
            "cap_violation": mm["cap_violation_rel"], "sweeps": report.sweeps,
            "converged": int(report.converged),
        })
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, COMPARE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# --------------------------------------------------------------------------- verify


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.abs(b).max()) if b.size else 0.0, np.finfo(float).tiny)
    return float(np.abs(a - b).max() / scale) if b.size else 0.0


def _dense_transitions(flow_triplet, n: int) -> np.ndarray:
    rows, cols, flow = flow_triplet
    flow = np.atleast_2d(flow)
    out = np.zeros((flow.shape[0], n, n))
    for ell in range(flow.shape[0]):
        np.add.at(out[ell], (rows, cols), flow[ell])
    return out


def _scalings(state) -> dict:
    if isinstance(state, sinkhorn_path.PathScalingState):
        return {"u": sinkhorn_path.scalings(state)}
    return {"U01": state.U01, "U0T": state.U0T, "u": state.shared_scalings()}


def check_projections(problem, sweeps: int = 2, perturb: float = 0.0) -> float:
    """Largest relative gap between structured and dense projections after ``sweeps`` sweeps."""
    mod = sinkhorn_path if not isinstance(problem, MultiCommodityProblem) else sinkhorn_multi
    st = mod.init_state(problem)
    for _ in range(sweeps):
        mod.sweep(st)
    M = oracle.dense_plan(problem, _scalings(st))
    f = 1.0 + perturb
    T, n = problem.T, problem.n
    worst = 0.0
    for t in range(1, T + 1):
        if mod is sinkhorn_path:
            worst = max(worst, _rel(f * mod.project_marginal(st, t), oracle.dense_projection(M, t)))
        else:
            worst = max(worst, _rel(f * mod.project_bimarginal(st, t), oracle.dense_projection(M, (0, t))),
                        _rel(f * mod.project_marginal(st, t), oracle.dense_projection(M, t)))
    for t in range(1, T):
        got = f * _dense_transitions(mod.transition_flow(st, t), n)
        ref = (oracle.dense_projection(M, (t, t + 1))[None] if mod is sinkhorn_path
               else oracle.dense_projection(M, (0, t, t + 1)))
        worst = max(worst, _rel(got, ref))
    return worst


def check_iterates(problem, sweeps: int = 10, perturb: float = 0.0) -> float:
    """Largest relative gap between structured and dense Sinkhorn scalings over ``sweeps`` sweeps."""
    mod = sinkhorn_path if not isinstance(problem, MultiCommodityProblem) else sinkhorn_multi
    st = mod.init_state(problem)
    worst = 0.0
    for ref in oracle.dense_sinkhorn(problem, sweeps):
        mod.sweep(st)
        got = _scalings(st)
        worst = max(worst, *(_rel((1.0 + perturb) * got[k], ref[k]) for k in ref))
    return worst


def check_multi_tensor(problem, sweeps: int = 20, perturb: float = 0.0) -> float:
    """Largest relative gap between joint and per-commodity capacity scalings over ``sweeps`` sweeps."""
    joint = sinkhorn_multi.init_state(problem)
    split = sinkhorn_multi.init_multi_tensor(problem)
    worst = 0.0
    for _ in range(sweeps):
        sinkhorn_multi.sweep(joint)
        sinkhorn_multi.sweep_multi_tensor(split)
        u_split = np.exp(np.array(split[0].a[1:-1]).reshape(problem.T - 2, problem.n))
        worst = max(worst, _rel((1.0 + perturb) * u_split, joint.shared_scalings()))
    return worst


VERIFY_TOL = 1e-10


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    for k in range(args.seeds):
        n, T = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        L = int(rng.integers(1, 4))
        tv = bool(rng.integers(2))
        single = oracle.random_tiny(rng, n=n, T=T, time_varying=tv)
        multi = oracle.random_tiny(rng, n=n, T=T, L=L, time_varying=tv)
        results = [
            ("projections/single", check_projections(single, perturb=args.perturb)),
            ("projections/multi", check_projections(multi, perturb=args.perturb)),
            ("iterates/single", check_iterates(single, perturb=args.perturb)),
            ("iterates/multi", check_iterates(multi, perturb=args.perturb)),
            ("multi-tensor", check_multi_tensor(multi, perturb=args.perturb) if T > 2 else 0.0),
        ]
        for name, err in results:
            ok = err <= VERIFY_TOL
            failures += not ok
            print(f"{'PASS' if ok else 'FAIL'} battery {k} {name} (n={n} T={T} L={L}) rel={err:.2e}")
    print(f"{args.seeds * 5 - failures}/{args.seeds * 5} checks passed")
    return EXIT_OK if failures == 0 else EXIT_VERIFY


# --------------------------------------------------------------------------- bench


def sweep_seconds(problem, sweeps: int) -> float:
    """Median wall time of one sweep (messages built before timing starts)."""
    mod = sinkhorn_multi if isinstance(problem, MultiCommodityProblem) else sinkhorn_path
    st = mod.init_state(problem)
    times = []
    for _ in range(sweeps):
        start = time.perf_counter()
        mod.sweep(st)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def cmd_bench(args) -> int:
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["T", "L", "n", "seconds_per_sweep"])
        for T in args.horizons:
            for L in args.commodities:
                p = generate(GridSpec(args.rows, args.cols, L, T, args.seed, args.epsilon))
                w.writerow([T, L, p.n, f"{sweep_seconds(p, args.sweeps):.6f}"])
                out.flush()
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otflow", description="Entropic dynamic network flow solver.")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a scenario instance")
    gsub = gen.add_subparsers(dest="scenario", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", "-o", type=Path, help="output JSON (stdout when omitted)")
    common.add_argument("--epsilon", type=_positive(float), default=None)
    grid = gsub.add_parser("grid", parents=[common], help="sparse grid network")
    grid.add_argument("--rows", type=int, default=10)
    grid.add_argument("--cols", type=int, default=10)
    grid.add_argument("--commodities", type=int, default=50)
    grid.add_argument("--horizon", type=int, default=80)
    grid.add_argument("--seed", type=int, default=0)
    dense = gsub.add_parser("random-dense", parents=[common], help="dense random digraph")
    dense.add_argument("--vertices", type=int, default=40)
    dense.add_argument("--edge-prob", type=float, default=0.5)
    dense.add_argument("--commodities", type=int, default=100)
    dense.add_argument("--horizon", type=int, default=100)
    dense.add_argument("--seed", type=int, default=0)
    traffic = gsub.add_parser("traffic", parents=[common], help="bundled street map, one commodity per vertex")
    traffic.add_argument("--horizon", type=int, default=30)
    traffic.add_argument("--truck-variant", action="store_true")
    traffic.add_argument("--source-cost", type=float, default=0.01)
    for p, default in ((grid, 0.01), (dense, 0.0025), (traffic, 0.01)):
        p.set_defaults(epsilon=default)

    solve_p = sub.add_parser("solve", help="solve an instance")
    solve_p.add_argument("problem", type=Path)
    solve_p.add_argument("--epsilon", type=_positive(float), default=None, help="override the stored value")
    solve_p.add_argument("--tol", type=_positive(float), default=1e-8)
    solve_p.add_argument("--max-sweeps", type=_nonnegative_int, default=1000)
    solve_p.add_argument("--out", "-o", type=Path, help="solution file (JSON or CSV)")
    solve_p.add_argument("--format", choices=("json", "csv"), default=None)
    solve_p.add_argument("--trace", type=Path, help="per-sweep convergence CSV")
    solve_p.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")

    cmp_p = sub.add_parser("compare", help="solver objective against the exact LP over several epsilon")
    cmp_p.add_argument("problem", type=Path)
    cmp_p.add_argument("--eps", type=_positive(float), nargs="+", default=[1.0, 0.1, 0.01])
    cmp_p.add_argument("--tol", type=_positive(float), default=1e-8)
    cmp_p.add_argument("--max-sweeps", type=_nonnegative_int, default=20000)
    cmp_p.add_argument("--out", "-o", type=Path)

    ver = sub.add_parser("verify", help="structured solvers against the dense oracle")
    ver.add_argument("--seeds", type=_positive(int), default=3, help="number of randomized batteries")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--perturb", type=float, nargs="?", const=1e-6, default=0.0,
                     help="scale structured results by 1 + PERTURB (negative control)")

    bench = sub.add_parser("bench", help="per-sweep time on the grid family")
    bench.add_argument("--rows", type=int, default=10)
    bench.add_argument("--cols", type=int, default=10)
    bench.add_argument("--horizons", type=int, nargs="+", default=[40, 80])
    bench.add_argument("--commodities", type=int, nargs="+", default=[25, 50])
    bench.add_argument("--sweeps", type=_positive(int), default=3)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--epsilon", type=_positive(float), default=0.01)
    bench.add_argument("--out", "-o", type=Path)
    return ap


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "compare": cmd_compare, "verify": cmd_verify,
            "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValidationError, ProblemFormatError) as exc:
        print(f"otflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"otflow: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
