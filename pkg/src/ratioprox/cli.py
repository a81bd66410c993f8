"""Command-line interface: gen, solve, bench, verify, rates.

Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 solver failure.
All randomness in a benchmark flows from a single --seed; per-instance seeds
come from datagen.derive_seed (sha256 over master seed, cell label, rep).
"""

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from . import baselines, datagen, rates
from .errors import (
    InnerSolverFailure,
    InvariantViolation,
    ParseError,
    RatioproxError,
)
from .problem import BoxLasso
from .schedules import (
    Constant,
    Exponential,
    GammaRule,
    Polynomial,
    PowerFloor,
    ToleranceSchedule,
    partial_sum,
    series_tails,
    validate_schedule,
)
from .solver import (
    MetricPolicy,
    SolveTrace,
    TerminationRule,
    check_error_criterion,
    run,
)
from .ssn_ball import BallDualSsn
from .ssn_lasso import LassoDualSsn

BENCH_SCHEMA_VERSION = 1
RATES_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3


class UsageError(RatioproxError):
    pass


def parse_schedule(spec, tau=2.0):
    """Parse "exp:eps0,q" | "poly:eps0,q" | "paper" | "exact"."""
    try:
        if spec == "paper":
            return ToleranceSchedule(PowerFloor(), tau=tau)
        if spec == "exact":
            return ToleranceSchedule(Constant(0.0), tau=tau)
        kind, _, args = spec.partition(":")
        eps0, q = (float(t) for t in args.split(","))
        if kind == "exp":
            return ToleranceSchedule(Exponential(eps0, q), tau=tau)
        if kind == "poly":
            return ToleranceSchedule(Polynomial(eps0, q), tau=tau)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad schedule spec {spec!r}: {exc}") from exc
    raise UsageError(f"bad schedule spec {spec!r}")


def parse_gamma(spec):
    """Parse "paper" | "const:v"."""
    if spec == "paper":
        return GammaRule(kind="decay_floor", value=0.01)
    kind, _, arg = spec.partition(":")
    if kind == "const" and arg:
        try:
            return GammaRule(kind="constant", value=float(arg))
        except ValueError as exc:
            raise UsageError(f"bad gamma spec {spec!r}") from exc
    raise UsageError(f"bad gamma spec {spec!r}")


def default_setup(inst, schedule, metric_kind=None, gamma="paper", exact=False):
    """Pick the subsolver + metric matching the instance variant."""
    gamma_rule = parse_gamma(gamma) if isinstance(gamma, str) else gamma
    metric_kind = {"id": "identity"}.get(metric_kind, metric_kind)
    if isinstance(inst.variant, BoxLasso):
        if exact:
            sub = baselines.ExactBoxProx.for_instance(inst)
        else:
            sub = LassoDualSsn()
        kind = metric_kind or "identity"
    else:
        if exact:
            raise UsageError("exact mode has no closed-form ball subsolver")
        sub = BallDualSsn()
        kind = metric_kind or "gram"
    if kind != sub.metric_kind:
        raise UsageError(
            f"metric {kind!r} incompatible with the {inst.variant_name} subsolver "
            f"(needs {sub.metric_kind!r})"
        )
    return sub, MetricPolicy(kind=kind, gamma=gamma_rule)


def default_init(inst, init_iters=200):
    if isinstance(inst.variant, BoxLasso):
        return baselines.fista_l1(inst.A, inst.b, inst.variant.lam, iters=init_iters)
    return baselines.feasible_init_ball(inst, l1_iters=init_iters)


def solve_instance(
    inst,
    schedule,
    metric_kind=None,
    gamma="paper",
    term=None,
    seed=None,
    init_iters=200,
    verify_invariants=True,
    keep_iterates=False,
):
    """gen/solve/bench shared path: init + run.  Returns (trace, init_time)."""
    exact = isinstance(schedule.rule, Constant) and schedule.rule.eps == 0.0
    sub, metric = default_setup(inst, schedule, metric_kind, gamma, exact=exact)
    t0 = time.perf_counter()
    x0 = default_init(inst, init_iters)
    init_time = time.perf_counter() - t0
    trace = run(
        inst,
        sub,
        schedule,
        metric,
        x0,
        term or TerminationRule(),
        seed=seed,
        verify_invariants=verify_invariants,
        keep_iterates=keep_iterates,
    )
    return trace, init_time


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    inst, x_orig = datagen.gen_instance(
        args.m,
        args.n,
        args.s,
        args.seed,
        variant=args.variant,
        lam=getattr(args, "lambda"),
        nf=args.nf,
    )
    manifest = datagen.save_instance(inst, args.out, x_orig=x_orig, seed=args.seed)
    print(f"wrote {manifest}")
    return EXIT_OK


def cmd_solve(args):
    inst = datagen.load_instance(args.instance)
    if args.variant and args.variant != inst.variant_name:
        raise UsageError(
            f"--variant {args.variant} does not match manifest "
            f"({inst.variant_name})"
        )
    schedule = parse_schedule(args.schedule)
    term = TerminationRule(rel_tol=args.tol, max_outer=args.max_iter)
    trace, init_time = solve_instance(
        inst,
        schedule,
        metric_kind=args.metric,
        gamma=args.gamma,
        term=term,
        seed=args.seed,
        verify_invariants=not args.bench_mode,
    )
    print(
        f"status={trace.status} outer={trace.outer_iterations} "
        f"inner={trace.total_inner} F={trace.final_F:.6e} "
        f"residual={trace.final_residual:.3e} init_s={init_time:.3f}"
    )
    if args.trace_out:
        trace.to_csv(args.trace_out)
        print(f"wrote {args.trace_out}")
    return EXIT_OK


def _bench_cell(variant, m, n, s, param, reps, master_seed, schedule_spec):
    label = f"{variant}:{m}x{n}x{s}:{param}"
    objs, outers, inners, times, inits, feas = [], [], [], [], [], []
    failed = 0
    for rep in range(reps):
        seed = datagen.derive_seed(master_seed, label, rep)
        if variant == "box_lasso":
            inst, _ = datagen.gen_instance(m, n, s, seed, variant=variant, lam=param)
        else:
            inst, _ = datagen.gen_instance(m, n, s, seed, variant=variant, nf=param)
        schedule = parse_schedule(schedule_spec)
        term = TerminationRule(
            max_total_inner=1000 if variant == "ball_constrained" else None
        )
        t0 = time.perf_counter()
        try:
            trace, init_time = solve_instance(
                inst, schedule, term=term, seed=seed, verify_invariants=False
            )
        except RatioproxError:
            failed += 1
            continue
        times.append(time.perf_counter() - t0 - init_time)
        inits.append(init_time)
        objs.append(trace.final_F)
        outers.append(trace.outer_iterations)
        inners.append(trace.total_inner)
        if variant == "ball_constrained":
            feas.append(max(row.feas_viol for row in trace.rows))
    row = {
        "schema_version": BENCH_SCHEMA_VERSION,
        "variant": variant,
        "m": m,
        "n": n,
        "s": s,
        "param": param,
        "reps": reps,
        "failed": failed,
        "obj": float(np.mean(objs)) if objs else math.nan,
        "iter": float(np.mean(outers)) if outers else math.nan,
        "inner": float(np.mean(inners)) if inners else math.nan,
        "time": float(np.mean(times)) if times else math.nan,
        "t0": float(np.mean(inits)) if inits else math.nan,
        "feas": float(np.max(feas)) if feas else math.nan,
    }
    return row


def cmd_bench(args):
    sizes = []
    for token in args.sizes:
        try:
            m, n, s = (int(t) for t in token.split(","))
        except ValueError as exc:
            raise UsageError(f"bad --sizes cell {token!r}") from exc
        sizes.append((m, n, s))
    params = (
        [float(t) for t in args.lambdas.split(",")]
        if args.variant == "box_lasso"
        else [float(t) for t in args.nf.split(",")]
    )
    rows = []
    for m, n, s in sizes:
        for param in params:
            row = _bench_cell(
                args.variant, m, n, s, param, args.reps, args.seed, args.schedule
            )
            rows.append(row)
            print(
                f"cell ({m},{n},{s}) param={param}: obj={row['obj']:.4e} "
                f"iter={row['iter']:.1f} inner={row['inner']:.1f} "
                f"time={row['time']:.2f}s t0={row['t0']:.2f}s"
                + (f" feas={row['feas']:.2e}" if args.variant != "box_lasso" else "")
            )
    fields = list(rows[0].keys())
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return EXIT_SOLVER if any(r["failed"] for r in rows) else EXIT_OK


def _verify_checks(args):
    """(name, callable) pairs; each callable returns (ok, detail)."""

    def schedule_validation():
        sched = parse_schedule(args.schedule) if args.schedule else None
        if sched is not None:
            res = validate_schedule(sched, relaxed=not args.strict)
            return res.ok, res.reason or "schedule admissible"
        ok = (
            validate_schedule(ToleranceSchedule(Polynomial(1.0, 3.5))).ok
            and not validate_schedule(ToleranceSchedule(Polynomial(1.0, 2.5))).ok
            and validate_schedule(ToleranceSchedule(Exponential(1.0, 0.9))).ok
        )
        return ok, "exponential/polynomial summability thresholds"

    def series_convergence():
        sched = ToleranceSchedule(Exponential(1.0, 0.5), tau=2.0)
        tails = series_tails(sched, 10**6)
        numeric = partial_sum(sched, 200)
        closed = sched.rule.tail(0) - sched.rule.tail(200)
        ok = all(t < 1e-8 for t in tails) and abs(numeric - closed) < 1e-12
        return ok, f"tails at k=1e6: {tails}"

    def gradient_checks():
        from .diagnostics import fd_check_ball, fd_check_lasso

        err1 = fd_check_lasso(seed=11, points=20)
        err2 = fd_check_ball(seed=12, points=20)
        return max(err1, err2) <= 1e-6, f"max rel FD error {max(err1, err2):.2e}"

    def descent_and_certificates():
        from .diagnostics import FaultySubsolver

        worst = 0.0
        for seed, variant in ((101, "box_lasso"), (202, "ball_constrained")):
            inst, _ = datagen.gen_instance(30, 80, 5, seed, variant=variant)
            schedule = parse_schedule("paper")
            sub, metric = default_setup(inst, schedule)
            if args.fault_inject:
                sub = FaultySubsolver(sub)
            x0 = default_init(inst)
            # run() raises InvariantViolation on any descent/certificate breach
            trace = run(
                inst, sub, schedule, metric, x0, TerminationRule(), seed=seed
            )
            for row in trace.rows:
                worst = max(worst, row.cert_lhs - row.cert_rhs)
        return worst <= 0.0, f"max(lhs - rhs) = {worst:.2e}"

    def corrupted_certificate_rejected():
        from .solver import ErrorCertificate

        cert = ErrorCertificate(
            delta_vec=np.array([10.0, 0.0]),
            delta_err=0.0,
            step=np.array([1.0, 0.0]),
            lhs=0.0,  # stale value, deliberately wrong
            rhs=1.0,
        )
        flagged = not check_error_criterion(cert, eps_k=0.1, g_next=1.0)
        return flagged, "recomputed criterion rejects a stale witness"

    def feasibility_ball():
        inst, _ = datagen.gen_instance(25, 60, 5, 33, variant="ball_constrained")
        trace, _ = solve_instance(inst, parse_schedule("paper"), seed=33)
        worst = max(row.feas_viol for row in trace.rows)
        return worst <= 1e-12, f"max ||Ax-b|| - sigma = {worst:.2e}"

    def exact_mode_equivalence():
        inst, _ = datagen.gen_instance(20, 50, 5, 44, variant="box_lasso")
        gamma = baselines.lipschitz_ata(inst.A) * 1.05
        x0 = baselines.fista_l1(inst.A, inst.b, inst.variant.lam, iters=50)
        term = TerminationRule(max_outer=50, rel_tol=0.0, f_tol_fast=0.0)
        trace = run(
            inst,
            baselines.ExactBoxProx.for_instance(inst),
            ToleranceSchedule(Constant(0.0)),
            MetricPolicy(kind="identity", gamma=GammaRule("constant", gamma)),
            x0,
            term,
            keep_iterates=True,
        )
        base = baselines.pgs_run(inst, x0, gamma=gamma, term=term)
        diff = max(
            float(np.linalg.norm(a - b))
            for a, b in zip(trace.iterates, base.iterates)
        )
        return diff <= 1e-10, f"max per-iterate gap {diff:.2e}"

    return [
        ("schedule_validation", schedule_validation),
        ("series_convergence", series_convergence),
        ("gradient_checks", gradient_checks),
        ("descent_and_certificates", descent_and_certificates),
        ("corrupted_certificate_rejected", corrupted_certificate_rejected),
        ("feasibility_ball", feasibility_ball),
        ("exact_mode_equivalence", exact_mode_equivalence),
    ]


def cmd_verify(args):
    failures = 0
    for name, check in _verify_checks(args):
        try:
            ok, detail = check()
        except RatioproxError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} check(s) failed")
        return EXIT_INVARIANT
    print("all checks passed")
    return EXIT_OK


def cmd_rates(args):
    trace = SolveTrace.from_csv(args.trace)
    schedule = parse_schedule(args.schedule)
    prediction = rates.predicted_rate(args.theta_f, schedule.rule)
    mode = "linear" if prediction.kind == "r_linear" else "power"
    slope, r2 = rates.fit_decay(trace, mode=mode)
    fitted = (
        {"mode": "linear", "log_rho": slope}
        if mode == "linear"
        else {"mode": "power", "exponent": -slope}
    )
    report = {
        "schema_version": RATES_SCHEMA_VERSION,
        "case": f"{prediction.regime}/{prediction.schedule}",
        "predicted": prediction.label,
        "fitted": fitted,
        "r2": r2,
    }
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(
        prog="ratioprox",
        description="Solvers and benchmarks for l1/l2-ratio sparse optimization.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance directory")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--s", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument(
        "--variant",
        choices=["box_lasso", "ball_constrained"],
        default="box_lasso",
    )
    g.add_argument("--nf", type=float, default=1.2)
    g.add_argument("--lambda", type=float, default=0.1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one instance from a manifest")
    s.add_argument("--instance", required=True)
    s.add_argument("--variant", choices=["box_lasso", "ball_constrained"])
    s.add_argument("--schedule", default="paper")
    s.add_argument("--metric", choices=["id", "gram"])
    s.add_argument("--gamma", default="paper")
    s.add_argument("--max-iter", type=int, default=50000)
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--trace-out")
    s.add_argument("--seed", type=int)
    s.add_argument(
        "--bench-mode",
        action="store_true",
        help="warn instead of aborting on invariant failures",
    )
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run seeded benchmark cells, write a CSV")
    b.add_argument("--variant", choices=["box_lasso", "ball_constrained"],
                   default="box_lasso")
    b.add_argument(
        "--sizes", nargs="+", required=True, metavar="M,N,S",
        help="one or more m,n,s cells",
    )
    b.add_argument("--lambdas", default="0.1")
    b.add_argument("--nf", default="1.2")
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--schedule", default="paper")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="run the runtime-invariant suite")
    v.add_argument("--schedule", help="validate this schedule spec only")
    v.add_argument("--strict", action="store_true")
    v.add_argument("--fault-inject", action="store_true")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rates", help="predicted-vs-fitted decay report")
    r.add_argument("--trace", required=True)
    r.add_argument("--schedule", required=True)
    r.add_argument("--theta-f", type=float, default=0.5)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rates)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantViolation,) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InnerSolverFailure, ParseError, RatioproxError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
