"""Command line front-end: ``run``, ``verify``, ``enumerate`` and ``norms``.

Exit codes: 0 success, 1 failed hard check (``verify``), 2 parse error,
3 validation error, 4 blow-up, 5 non-contraction or ball exit, 6 capacity.
Artifacts are written to a staging directory that is renamed into place only
when the command succeeds.
"""
import argparse
import csv
import math
import os
import shutil
import sys
import tempfile

import numpy as np

from .config import parse_config, scenario_path
from .exceptions import (BallExitError, BlowUpError, CapacityError, ConfigParseError,
                         ConfigValidationError, NonContractionError, SolverConvergenceError)
from .field import FLOAT_FMT, hzz_norm, l2_norm, read_csv, sk_norm
from .multiindex import MultiIndex, TruncationPolicy, enumerate_indices, weight
from .propagator import evolve
from .solver import (brute_force_linear, solve_deterministic_nls, solve_linear,
                     solve_semilinear, solve_wick_square, tails_decreasing, verify_bounds,
                     weighted_tails, write_kondratiev_history, write_report)
from .wick import read_chaos_field, write_chaos_field

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_BLOWUP = 4
EXIT_NONCONTRACTION = 5
EXIT_CAPACITY = 6


class _Staging:
    """Write into a sibling temporary directory; promote on success, discard on failure."""

    def __init__(self, target):
        self.target = os.path.abspath(target)

    def __enter__(self):
        parent = os.path.dirname(self.target)
        os.makedirs(parent, exist_ok=True)
        self.path = tempfile.mkdtemp(prefix=".staging-", dir=parent)
        return self.path

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.path, ignore_errors=True)
            return False
        if os.path.isdir(self.target):
            shutil.rmtree(self.target)
        os.replace(self.path, self.target)
        return False


def _solve(cfg, threads):
    problem = cfg.problem()
    u0 = cfg.initial_field()
    pcfg = cfg.propagator_config()
    if cfg.mode == "linear":
        traj, report = solve_linear(problem, u0, pcfg, cfg.z, cfg.zeta, threads=threads)
    elif cfg.mode == "wick2":
        traj, report = solve_wick_square(problem, cfg.lam, u0, pcfg, cfg.z, cfg.zeta, threads=threads)
    else:
        traj, report = solve_semilinear(problem, cfg.nonlinearity_term(), u0, pcfg, cfg.z, cfg.zeta,
                                        tol=cfg.picard_tol, max_iters=cfg.picard_max_iters,
                                        threads=threads)
    return problem, u0, pcfg, traj, report


def _write_artifacts(out, cfg, traj, report, record):
    stride = cfg.stride
    exp_traj = traj.expectation(cfg.z, cfg.zeta)
    keep = sorted(set(range(0, len(exp_traj), stride)) | {len(exp_traj) - 1})
    exp_traj.times = exp_traj.times[keep]
    exp_traj.values = exp_traj.values[keep]
    exp_traj.write(os.path.join(out, "trajectory"))
    write_chaos_field(traj.final, os.path.join(out, "final"), cfg.z, cfg.zeta)
    write_report(report, record, out)
    write_kondratiev_history(traj, report, os.path.join(out, "kondratiev.csv"))
    if cfg.q:
        with open(os.path.join(out, "weighted_sums.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "weighted_sum", "tails_decreasing"])
            for q in cfg.q:
                tails = weighted_tails(report.L, q)
                w.writerow([FLOAT_FMT.format(q), FLOAT_FMT.format(math.fsum(tails)),
                            int(tails_decreasing(tails))])


def _hard_checks(cfg, problem, u0, pcfg, traj, record):
    """Unbiasedness, unitarity and (when small enough) the brute-force oracle."""
    zero = MultiIndex.zero()
    u00 = u0[zero]
    H = problem.hamiltonian
    if cfg.mode == "wick2":
        ref = solve_deterministic_nls(u00, H, cfg.lam, cfg.T, pcfg)
    elif cfg.mode == "linear":
        ref = evolve(u00, H, None, cfg.T, pcfg).values
    else:
        ref = None
    if ref is not None:
        err = float(np.max(np.abs(traj.coeffs[zero] - ref)))
        record.add("unbiasedness", err, 1e-12, err <= 1e-12, hard=True)
    if H.hermitian and np.any(u00.values):
        hist = evolve(u00, H, None, cfg.T, pcfg).l2_history()
        drift = float(np.max(np.abs(hist - hist[0])) / hist[0])
        record.add("unitarity_drift", drift, 1e-8, drift <= 1e-8, hard=True)
    linear_like = cfg.mode == "linear" or (cfg.mode == "wick2" and cfg.lam == 0)
    if linear_like:
        try:
            bf = brute_force_linear(problem, u0, pcfg)
        except CapacityError:
            return
        err = max(hzz_norm(bf.final[a] - traj.final[a], cfg.z, cfg.zeta) for a in problem.indices())
        record.add("brute_force_max_error", err, 1e-8, err < 1e-8, hard=True)


def _load(args):
    path = args.config
    if not os.path.exists(path):
        try:
            path = scenario_path(path)
        except FileNotFoundError:
            pass
    return parse_config(path)


def cmd_run(args, verify=False):
    cfg = _load(args)
    out = args.out or cfg.directory
    problem, u0, pcfg, traj, report = _solve(cfg, args.threads)
    record = verify_bounds(report, problem, cfg.lam)
    if verify:
        _hard_checks(cfg, problem, u0, pcfg, traj, record)
    with _Staging(out) as stage:
        _write_artifacts(stage, cfg, traj, report, record)
        if verify:
            record.write_csv(os.path.join(stage, "verification.csv"))
    if verify:
        print(record.table())
        print(f"q_star = {report.q_star:g}, q_theoretical = {record.constants['q_theoretical']:.6g}")
        ok = record.all_passed() if args.strict else record.hard_passed()
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    print(f"{cfg.mode}: {len(traj.coeffs)} coefficients, {len(traj) - 1} steps -> {out}")
    return EXIT_OK


def cmd_enumerate(args):
    if args.config:
        policy = _load(args).policy
    else:
        policy = TruncationPolicy(args.K, args.N)
    rows = enumerate_indices(policy)
    if args.out:
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "order", "weight_p2"])
            for a in rows:
                w.writerow([str(a), a.order, FLOAT_FMT.format(weight(a, -2))])
    else:
        for a in rows:
            print(a)
    return EXIT_OK


def cmd_norms(args):
    z, zeta = args.z, args.zeta
    target = args.path
    lines = []
    if os.path.isdir(target):
        field = read_chaos_field(target)
        for a, g in field.items():
            lines.append((str(a), l2_norm(g), sk_norm(g, z, zeta), hzz_norm(g, z, zeta)))
    else:
        g = read_csv(target)
        lines.append((os.path.basename(target), l2_norm(g), sk_norm(g, z, zeta), hzz_norm(g, z, zeta)))
    header = ["name", "l2_norm", "sk_norm", "hzz_norm"]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for name, *vals in lines:
                w.writerow([name] + [FLOAT_FMT.format(v) for v in vals])
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        for name, *vals in lines:
            w.writerow([name] + [FLOAT_FMT.format(v) for v in vals])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wickchaos",
                                     description="Chaos-expansion solvers for stochastic Schroedinger equations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="scenario INI file (or the name of a shipped scenario)")
        p.add_argument("--out", help="output directory (overrides [output] directory)")
        p.add_argument("--threads", type=int, default=1, help="worker threads per graded level")
        p.add_argument("--strict", action="store_true",
                       help="treat bound-chain failures as hard failures")

    common(sub.add_parser("run", help="solve a scenario and write CSV artifacts"))
    common(sub.add_parser("verify", help="solve, then check invariants and the bound chain"))
    p = sub.add_parser("enumerate", help="list the truncated index set")
    common(p, config_required=False)
    p.add_argument("-K", type=int, default=2)
    p.add_argument("-N", type=int, default=2)
    p = sub.add_parser("norms", help="norms of a dumped field CSV or coefficient directory")
    p.add_argument("path")
    p.add_argument("--z", type=int, default=0)
    p.add_argument("--zeta", type=float, default=0.0)
    p.add_argument("--out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_run(args, verify=True)
        if args.command == "enumerate":
            return cmd_enumerate(args)
        return cmd_norms(args)
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        for e in exc.errors:
            print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (NonContractionError, BallExitError) as exc:
        print(f"no contraction: {exc}", file=sys.stderr)
        return EXIT_NONCONTRACTION
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except SolverConvergenceError as exc:
        print(f"solver: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
