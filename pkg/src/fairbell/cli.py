"""Command-line entry point: ``fairbell fig1 | scheme | fig3 | verify | audit | simulate``.

Exit codes: 0 success, 1 verification failure, 2 usage or malformed input,
3 runtime failure (optimizer, empty log cells).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import __version__
from .errors import EmptyCellError, FairbellError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _grid(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise UsageError("--steps must be at least 1")
    if lo > hi:
        raise UsageError("range minimum exceeds maximum")
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, steps)


def _cfg(args, **kw):
    from .optimize import OptimizationConfig

    if args.restarts < 1:
        raise UsageError("--restarts must be positive")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    opts = dict(restarts=args.restarts, seed=args.seed)
    if args.tol is not None:
        opts["convergence_tol"] = args.tol
    opts.update(kw)
    return OptimizationConfig(**opts)


# --- commands ---------------------------------------------------------------


def cmd_fig1(args) -> int:
    from .optimize import scan_fixed_loss

    if not (0 < args.p_min <= args.p_max <= 1):
        raise UsageError("need 0 < --p-min <= --p-max <= 1")
    grid = _grid(args.p_min, args.p_max, args.steps)
    points = scan_fixed_loss(grid, _cfg(args))
    _write(_csv(["p", "best_B"], [(s.p, s.best_B) for s in points]), args.out)
    return EXIT_OK


def _kappa_grid(args):
    if not (0 <= args.kappa_min <= args.kappa_max < 1):
        raise UsageError("need 0 <= --kappa-min <= --kappa-max < 1")
    return _grid(args.kappa_min, args.kappa_max, args.steps)


def cmd_scheme(args) -> int:
    from .optimize import kappa_scheme_point
    from .schemes import optimal_theta

    cfg = _cfg(args)
    rows = []
    for k in _kappa_grid(args):
        theta, _ = optimal_theta(k)
        p = kappa_scheme_point(k, cfg)
        rows.append((k, theta, p.B_ent, p.B_sep, p.lhv_max, p.eta))
    _write(_csv(["kappa", "Theta", "B_ent", "B_sep", "lhv_max", "eta"], rows), args.out)
    return EXIT_OK


def cmd_fig3(args) -> int:
    from .optimize import optimize_scheme_tradeoff

    points = optimize_scheme_tradeoff(_kappa_grid(args), _cfg(args))
    rows = [(p.kappa, p.B_ent, p.B_sep, p.lhv_max, p.eta) for p in points]
    _write(_csv(["kappa", "B_ent", "B_sep", "lhv_max", "eta"], rows), args.out)
    meta = {
        "best_effort": True,
        "search_space": (
            "filter angles shared by both parties (theta_A = phi_B, theta_a = phi_b) "
            "with unrestricted Deltas at the filter's success operators; state fixed to "
            "the maximally entangled scheme state"
        ),
        "eta": "geometric mean of the four per-setting singular-value ratios",
        "angles": {_fmt(p.kappa): list(p.angles) for p in points},
        "setting_etas": {_fmt(p.kappa): list(p.setting_etas) for p in points},
        "seed": args.seed,
        "restarts": args.restarts,
    }
    text = json.dumps(meta, indent=1, sort_keys=True) + "\n"
    if args.out in (None, "-"):
        sys.stderr.write(text)
    else:
        _write(text, args.out + ".meta.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    t0 = time.perf_counter()
    checks = run_checks(args.seed)
    failed = [c.name for c in checks if not c.passed]
    report = {
        "passed": not failed,
        "failed": failed,
        "seconds": time.perf_counter() - t0,
        "checks": {
            c.name: {"passed": c.passed, "value": c.value, "detail": c.detail, "seconds": c.seconds}
            for c in checks
        },
    }
    _write(json.dumps(report, indent=1) + "\n", args.out)
    if failed:
        sys.stderr.write("failed checks: " + ", ".join(failed) + "\n")
        return EXIT_CHECK
    return EXIT_OK


def cmd_audit(args) -> int:
    from .audit import EventLog, LogFormatError, fairness_test

    if not 0 < args.significance <= 0.5:
        raise UsageError("--significance must lie in (0, 0.5]")
    if args.bootstrap < 0:
        raise UsageError("--bootstrap must be non-negative")
    try:
        with open(args.log, encoding="utf-8") as fh:
            log = EventLog.from_csv(fh.read())
    except (OSError, LogFormatError) as exc:
        raise UsageError(f"cannot read log: {exc}") from exc
    report = fairness_test(
        log, args.significance, bootstrap=args.bootstrap, seed=args.seed, bell_resamples=args.bootstrap
    )
    _write(report.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from . import audit, schemes
    from .operators import PAULI_X, PAULI_Z
    from .scenario import BellScenario, DichotomicMeasurement, PartySettings

    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.efficiencies:
        try:
            eff = [float(x) for x in args.efficiencies.split(",")]
        except ValueError as exc:
            raise UsageError("--efficiencies takes four comma-separated numbers") from exc
        if len(eff) != 4 or not all(0 <= e <= 1 for e in eff):
            raise UsageError("--efficiencies takes four numbers in [0, 1]")
        log = audit.log_from_efficiencies(eff, args.n, args.seed)
    elif args.scenario == "appendix-a":
        log = audit.simulate_log(schemes.appendix_a_scenario(), args.n, args.seed)
    else:
        z, x = np.asarray(PAULI_Z), np.asarray(PAULI_X)
        eye = np.eye(2)

        def proj(op):
            return DichotomicMeasurement.from_success_and_delta(eye, op)

        alice = PartySettings(proj(z), proj(x))
        bob = PartySettings(proj((z + x) / np.sqrt(2)), proj((z - x) / np.sqrt(2)))
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        s = BellScenario(np.outer(psi, psi), alice, bob)
        log = audit.simulate_log(s, args.n, args.seed)
    _write(log.to_csv(), args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol=True):
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if tol:
            p.add_argument("--tol", type=float, default=None, help="optimizer convergence tolerance")

    p = sub.add_parser("fig1", help="best B versus loss p with M_B = diag(1, p)")
    p.add_argument("--p-min", type=float, default=0.02)
    p.add_argument("--p-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--restarts", type=int, default=32)
    common(p)
    p.set_defaults(func=cmd_fig1)

    for name, func, helptext in (
        ("scheme", cmd_scheme, "non-orthogonal-state scheme curves"),
        ("fig3", cmd_fig3, "optimised filter scheme curves (best effort)"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--kappa-min", type=float, default=0.0)
        p.add_argument("--kappa-max", type=float, default=0.6)
        p.add_argument("--steps", type=int, default=25)
        p.add_argument("--restarts", type=int, default=16)
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="run the built-in verification suite")
    common(p, tol=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("audit", help="test an event log for setting-independent loss")
    p.add_argument("--log", required=True)
    p.add_argument("--significance", type=float, default=0.05)
    p.add_argument("--bootstrap", type=int, default=2000)
    common(p, tol=False)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("simulate", help="write a simulated event log")
    p.add_argument("--scenario", choices=("singlet", "appendix-a"), default="singlet")
    p.add_argument("--efficiencies", default=None, help="four pair efficiencies A,B A,b a,B a,b")
    p.add_argument("--n", type=int, default=10000, help="trials per setting pair")
    common(p, tol=False)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"fairbell {args.command}: {exc}\n")
        return EXIT_USAGE
    except EmptyCellError as exc:
        sys.stderr.write(f"fairbell {args.command}: {exc}\n")
        return EXIT_RUNTIME
    except FairbellError as exc:
        sys.stderr.write(f"fairbell {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
