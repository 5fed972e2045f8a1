"""Command-line interface: ``spatialrank {test,simulate,theory,power}``.

Exit codes: 0 success (no rejection for ``test``), 3 rejection (``test``
only), 1 usage error, 2 data or configuration error, 4 numerical or
convergence failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REJECT, EXIT_NUMERIC = 0, 1, 2, 3, 4
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="spatialrank", description="High-dimensional spatial-rank two-sample tests.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test two CSV samples for equal location")
    t.add_argument("--x1", required=True, help="CSV file, one observation per row")
    t.add_argument("--x2", required=True)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--mode", choices=("fast", "exact", "shared"), default="fast")
    t.add_argument("--method", choices=("sr", "tr"), default="sr")
    t.add_argument("--inner-threads", type=int, default=1,
                   help="threads for linear algebra inside the test (default 1)")

    s = sub.add_parser("simulate", help="run a simulation plan")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--reps", type=int, help="override every cell's replication count")
    s.add_argument("--seed", type=int, help="override master_seed")
    s.add_argument("--threads", help="worker processes (integer or 'auto')")
    s.add_argument("--quiet", action="store_true")

    th = sub.add_parser("theory", help="Monte Carlo checks of sign-moment constants")
    th.add_argument("--check", required=True, choices=("are", "tau", "moments", "c0"))
    th.add_argument("--family", choices=("normal", "student_t", "mixture_normal"), default="normal")
    th.add_argument("--nu", type=float, default=3.0)
    th.add_argument("--p", type=int, default=10)
    th.add_argument("--reps", type=int, help="Monte Carlo draws (outer draws for tau); default 100000, 2000 for tau")
    th.add_argument("--inner-reps", type=int, default=1000, help="inner draws for tau")
    th.add_argument("--seed", type=int, default=0)

    pw = sub.add_parser("power", help="asymptotic power of SR and PA")
    pw.add_argument("--n1", type=int, required=True)
    pw.add_argument("--n2", type=int, required=True)
    pw.add_argument("--p", type=int, required=True)
    pw.add_argument("--eta", type=float, required=True)
    pw.add_argument("--sparsity", type=float, default=0.5)
    pw.add_argument("--family", choices=("normal", "student_t", "mixture_normal"), default="normal")
    pw.add_argument("--nu", type=float, default=3.0)
    pw.add_argument("--correlation", choices=("identity", "ar1"), default="ar1")
    pw.add_argument("--rho", type=float, default=0.5)
    pw.add_argument("--alpha", type=float, default=0.05)
    pw.add_argument("--reps", type=int, default=100_000)
    pw.add_argument("--seed", type=int, default=0)
    return ap


def _limit_threads(k):
    for var in _THREAD_VARS:
        os.environ.setdefault(var, str(k))


def _print_result(res):
    rows = [("method", res.method), ("statistic", f"{res.statistic:.6g}")]
    if res.variance_est is not None:
        rows.append(("variance_est", f"{res.variance_est:.6g}"))
    if res.df is not None:
        rows.append(("df", str(res.df)))
    rows += [("z_score", f"{res.z_score:.6g}"), ("p_value", f"{res.p_value:.6g}"),
             ("alpha", f"{res.alpha:g}"), ("reject", str(res.reject).lower())]
    if res.trace_estimates is not None:
        rows.append(("trace_estimates", ", ".join(f"{v:.6g}" for v in res.trace_estimates)))
    if res.mode is not None:
        rows.append(("mode", res.mode))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k.ljust(width)}  {v}")
    print(json.dumps(res.asdict()))


def _cmd_test(args):
    from .data import read_matrix
    from .q2 import tr_test_q2
    from .sr import sr_test

    x1, x2 = read_matrix(args.x1), read_matrix(args.x2)
    if args.method == "sr":
        res = sr_test(x1, x2, args.alpha, mode=args.mode)
    else:
        res = tr_test_q2(x1, x2, args.alpha)
    _print_result(res)
    return EXIT_REJECT if res.reject else EXIT_OK


def _cmd_simulate(args):
    from .config import load_plan
    from .harness import cells_csv, render_table, run_plan, timings_csv

    plan = load_plan(args.config, reps_override=args.reps, seed_override=args.seed,
                     workers_override=args.threads)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} replications", end="", file=sys.stderr, flush=True)

    results = run_plan(plan, progress)
    if not args.quiet and results:
        print(file=sys.stderr)
    os.makedirs(args.out, exist_ok=True)
    table = render_table(plan, results)
    for name, text in (("cells.csv", cells_csv(plan, results)), ("timings.csv", timings_csv(results)),
                       ("table.txt", table)):
        with open(os.path.join(args.out, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    print(table, end="")
    return EXIT_OK


def _family_spec(args, p):
    from .scenarios import ScenarioSpec

    corr = getattr(args, "correlation", "identity")
    return ScenarioSpec(args.family, p, correlation=corr, rho=getattr(args, "rho", 0.5), nu=args.nu)


def _cmd_theory(args):
    import numpy as np

    from . import theory
    from .core import mc_bilinear_moment4, mc_quadform_moment2, sphere_bilinear_moment4, sphere_quadform_moment2

    def show(label, est, ref=None):
        line = f"{label}: {est.value:.6g} +/- {est.se:.3g}"
        if ref is not None:
            line += f"  (reference {ref:.6g}, {abs(est.value - ref) / est.se if est.se else 0:.2f} SE)"
        print(line)

    spec = _family_spec(args, args.p)
    if args.reps is None:
        args.reps = 2000 if args.check == "tau" else 100_000
    if args.check == "c0":
        ref = theory.c0_normal_closed_form(args.p) if args.family == "normal" and args.p >= 2 else None
        show("c0", theory.estimate_c0(spec, mc_reps=args.reps, seed=args.seed), ref)
    elif args.check == "are":
        ref = None
        if args.family == "normal" and args.p >= 2:
            ref = 2.0 * theory.c0_normal_closed_form(args.p) ** 2 * args.p
        show("ARE(SR, PA)", theory.estimate_are(spec, mc_reps=args.reps, seed=args.seed), ref)
    elif args.check == "tau":
        est = theory.estimate_tau_f(spec, outer_reps=args.reps, inner_reps=args.inner_reps, seed=args.seed)
        if args.family == "normal" and args.p == 1:
            show("tau_F", est, 1.0 / 3.0)
        else:
            show("tau_F", est)
            lim = theory.tau_f_radial_limit(spec, seed=args.seed)
            print(f"large-p limit for this family: {lim.value:.6g} +/- {lim.se:.3g}")
    else:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed))
        a = rng.standard_normal((args.p, args.p))
        m = (a + a.T) / 2.0
        for label, exact, mc in (("E(u'Mu)^2", sphere_quadform_moment2, mc_quadform_moment2),
                                 ("E(u1'Mu2)^4", sphere_bilinear_moment4, mc_bilinear_moment4)):
            val, se = mc(m, args.reps, rng)
            show(label, theory.MCEstimate(val, se), exact(m))
    return EXIT_OK


def _cmd_power(args):
    from . import theory

    spec = _family_spec(args, args.p)
    params = theory.power_inputs(spec, args.n1, args.n2, args.eta, args.sparsity, args.alpha,
                                 mc_reps=args.reps, seed=args.seed)
    print(f"c0          {params.c0:.6g}")
    print(f"E|eps|^2    {params.eps_norm2:.6g}")
    print(f"delta_quad  {params.delta_quad:.6g}")
    print(f"tr(R^2)     {params.trace_r2:.6g}")
    print(f"beta_SR     {theory.theoretical_power_sr(params):.6g}")
    print(f"beta_PA     {theory.theoretical_power_pa(params):.6g}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    _limit_threads(getattr(args, "inner_threads", 1))

    from .errors import ConvergenceError, EstimatorBreakdownError, SpatialRankError

    handlers = {"test": _cmd_test, "simulate": _cmd_simulate, "theory": _cmd_theory, "power": _cmd_power}
    try:
        return handlers[args.command](args)
    except (ConvergenceError, EstimatorBreakdownError, FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SpatialRankError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
