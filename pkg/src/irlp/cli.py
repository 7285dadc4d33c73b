"""Command-line interface: generate instances, solve them, run experiment
grids, and check solver traces against the method guarantees."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .solvers import Method, SolverConfig, solve


def _add_generate(sub):
    p = sub.add_parser("generate", help="generate a random instance file")
    p.add_argument("--kind", choices=[harness.KIND_ORTHONORMAL, harness.KIND_UNIFORM],
                   default=harness.KIND_ORTHONORMAL)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, default=None,
                   help="planted sparsity (default: round(m/5); orthonormal only)")
    p.add_argument("--sigma", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def _add_solve(sub):
    p = sub.add_parser("solve", help="solve one instance with one method")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", required=True, choices=[m.value for m in Method])
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=3e-3)
    p.add_argument("--alpha", type=int, default=1, choices=[1, 2])
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-outer", type=int, default=None)
    p.add_argument("--warmstart-tol", type=float, default=harness.LASSO_WARMSTART_TOL)
    p.add_argument("--trace-out", default=None)


def _add_experiment(sub):
    p = sub.add_parser("experiment", help="run an experiment grid from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--quiet", action="store_true")


def _add_check(sub):
    p = sub.add_parser("check", help="validate a trace file against the guarantees")
    p.add_argument("--trace", required=True)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="irlp")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_solve(sub)
    _add_experiment(sub)
    _add_check(sub)
    args = parser.parse_args(argv)
    return {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "experiment": _cmd_experiment,
        "check": _cmd_check,
    }[args.command](args)


def _cmd_generate(args):
    if args.kind == harness.KIND_ORTHONORMAL:
        T = args.T if args.T is not None else harness.default_sparsity(args.m)
        instance = harness.generate_orthonormal_instance(
            args.m, args.n, T, args.sigma, args.seed
        )
    else:
        instance = harness.generate_uniform_instance(args.m, args.n, args.seed)
    harness.save_instance(instance, args.out)
    print(f"wrote {args.kind} instance {args.m}x{args.n} (seed {args.seed}) to {args.out}")
    return 0


def _cmd_solve(args):
    instance = harness.load_instance(args.instance)
    prob = harness.make_problem(instance, args.lam, args.p)
    x0 = harness.solve_lasso_warmstart(prob.objective, args.lam, args.warmstart_tol)
    cfg = SolverConfig(
        method=Method(args.method),
        alpha=args.alpha,
        termination_tol=args.tol,
        max_outer=args.max_outer,
    )
    run = solve(prob, cfg, x0)
    print(
        f"{args.method}: status={run.status.value} objective={run.final_objective:.6f} "
        f"residual={run.final_residual:.3e} outer={run.outer_iterations} "
        f"inner={run.total_inner} support={run.records[-1].support_size}"
    )
    if args.trace_out:
        harness.save_trace(run, args.trace_out)
        print(f"trace written to {args.trace_out}")
    return 0 if run.status.value != "error" else 1


def _cmd_experiment(args):
    spec = harness.parse_experiment_spec(Path(args.spec).read_text())
    progress = None
    if not args.quiet:
        def progress(row):
            print(
                f"{row['m']:>5} {row['n']:>5} p={row['p']:<4} {row['method']:<15} "
                f"seed={row['seed']} obj={row['objective']:.6f} "
                f"status={row['status']} time={row['wall_time_s']:.2f}s"
            )
    rows = harness.run_experiment(spec, out_dir=args.out_dir, progress=progress)
    print(f"{len(rows)} rows written to {args.out_dir}/{spec.output_path}.csv")
    return 0


def _cmd_check(args):
    trace = harness.load_trace(args.trace)
    problems = harness.check_trace(trace)
    if problems:
        for msg in problems:
            print(f"FAIL: {msg}")
        return 1
    print(f"OK: trace {args.trace} satisfies the method guarantees")
    return 0


if __name__ == "__main__":
    sys.exit(main())
