"""Command-line interface.

Exit codes: 0 success, 2 input or parse error, 3 precondition violation,
4 numerical failure.
"""

import argparse
import configparser
import itertools
import os
import sys

import numpy as np

from .conditional import MCConfig, clr_test_conventional, mclr_test, oracle_mclr_test
from .exceptions import MCLRError, NotPositiveDefinite, PreconditionError
from .linalg import thin_qr
from .report import (
    InputError,
    csv_text,
    fmt,
    power_svg,
    provenance,
    read_iv_csv,
    read_matrix_csv,
)
from .simulation import (
    DEFAULT_DELTA_GRID,
    build_design,
    run_power,
    run_size,
    tabulate_critvals,
)
from .statistics import Hypothesis, leverage_diag, partial_out

EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4

TABLE_K = "1,2,3,4,5,10,20,50"
TABLE_TAU = "1,5,10,20,50,75,100,50000"
LEVERAGE_CAUTION = 0.5


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text):
    value = int(text, 0)
    if not -(2**63) <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def _add_mc_flags(p, reps=10_000):
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--reps", type=int, default=reps, help="Monte-Carlo replications")
    p.add_argument("--seed", type=_seed, default=0, help="master seed (decimal 64-bit)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (never changes results)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mclr",
        description="Modified conditional likelihood ratio test with many weak instruments.",
    )
    parser.add_argument("--config", help="key = value file supplying defaults; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test H0: beta = beta0 on a CSV sample")
    p.add_argument("data", help="CSV with columns y, y2_1..y2_l, z_1..z_k[, w_1..w_p]")
    p.add_argument("--beta0", type=_float_list, default=None, help="hypothesised beta (comma list)")
    p.add_argument("--which", choices=("mclr", "clr"), default="mclr")
    p.add_argument("--omega", help="known reduced-form covariance (headerless CSV); adds the oracle test")
    p.add_argument("--out", help="write the decision as CSV")
    _add_mc_flags(p)

    p = sub.add_parser("critval", help="tabulate conditional critical values")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k-grid", type=_int_list, default=_int_list(TABLE_K))
    p.add_argument("--tau-grid", type=_float_list, default=_float_list(TABLE_TAU))
    p.add_argument("--which", choices=("mclr", "clr"), default="mclr")
    p.add_argument("--out", help="output CSV (stdout when omitted)")
    _add_mc_flags(p)

    p = sub.add_parser("sim", help="size and power experiments")
    p.add_argument("kind", choices=("size", "power"))
    p.add_argument("--n", type=int, default=None, help="sample size (size: 100, power: 200)")
    p.add_argument("--k", type=_int_list, default=[30], help="instrument counts (comma list)")
    p.add_argument("--rho", type=_float_list, default=[0.2], help="endogeneity (comma list)")
    p.add_argument("--delta2", type=_float_list, default=None,
                   help="first-stage strength (comma list; power default 2k)")
    p.add_argument("--beta0", type=float, default=0.0)
    p.add_argument("--tests", default=None, help="comma list from mclr,clr,mclr-oracle")
    p.add_argument("--crit-reps", type=int, default=1999, help="critical-value draws per test")
    p.add_argument("--calib-reps", type=int, default=10_000, help="power: null calibration replications")
    p.add_argument("--delta-grid", type=_float_list, default=list(DEFAULT_DELTA_GRID))
    p.add_argument("--design-seed", type=_seed, default=0)
    p.add_argument("--direction-seed", type=_seed, default=None,
                   help="random direction for Pi2 instead of equal weights")
    p.add_argument("--out", default=".", help="output directory")
    _add_mc_flags(p, reps=None)

    p = sub.add_parser("diag", help="leverage diagnostic for the instrument matrix")
    p.add_argument("data")
    return parser


def _config_defaults(path):
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_string("[mclr]\n" + fh.read())
    except (OSError, configparser.Error) as exc:
        raise CLIError(f"{path}: cannot parse config ({exc}).", EXIT_INPUT) from exc
    return {key.replace("-", "_"): value for key, value in cp["mclr"].items()}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        defaults = _config_defaults(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        for key, raw in defaults.items():
            if key not in known:
                raise CLIError(f"{args.config}: unknown key {key!r} for '{args.command}'.", EXIT_INPUT)
            action = known[key]
            try:
                value = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise CLIError(f"{args.config}: bad value for {key!r}: {exc}", EXIT_INPUT) from exc
            sub.set_defaults(**{key: value})
        args = parser.parse_args(argv)
    return args


def _mc_config(args, reps=None):
    return MCConfig(reps=reps or args.reps, alpha=args.alpha, master_seed=args.seed, threads=args.threads)


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _tau_text(tau):
    tau = np.atleast_2d(tau)
    return fmt(tau[0, 0]) if tau.size == 1 else ";".join(fmt(v) for v in tau.ravel())


def cmd_test(args):
    data = read_iv_csv(args.data)
    beta0 = args.beta0 if args.beta0 is not None else [0.0] * data.l
    h = Hypothesis(beta0)
    cfg = _mc_config(args)
    runner = mclr_test if args.which == "mclr" else clr_test_conventional
    decisions = [runner(data, h, cfg)]
    if args.omega:
        omega = read_matrix_csv(args.omega)
        if omega.shape != (data.l + 1, data.l + 1):
            raise CLIError(f"{args.omega}: omega must be {data.l + 1} x {data.l + 1}.", EXIT_INPUT)
        decisions.append(oracle_mclr_test(data, h, omega, cfg))
    lines = []
    for d in decisions:
        lines.append(
            f"{d.test}: n={d.n} k={d.k} LR1={fmt(d.statistic)} tau={_tau_text(d.conditioning_tau)} "
            f"critical_value={fmt(d.critical_value)} pvalue={fmt(d.pvalue)} "
            f"decision={'reject' if d.reject else 'do not reject'} "
            f"(alpha={fmt(d.alpha)}, reps={d.reps}, seed={d.master_seed})"
        )
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        head = provenance("test", data=os.path.basename(args.data), beta0=",".join(fmt(b) for b in h.beta0),
                          alpha=fmt(cfg.alpha), reps=cfg.reps, seed=cfg.master_seed)
        rows = [[d.test, d.n, d.k, float(d.statistic), _tau_text(d.conditioning_tau),
                 float(d.critical_value), float(d.pvalue), int(d.reject)] for d in decisions]
        _emit(csv_text(head, ["test", "n", "k", "statistic", "tau", "critical_value", "pvalue", "reject"], rows),
              args.out)


def cmd_critval(args):
    cfg = _mc_config(args)
    for k in args.k_grid:
        if k < 1 or args.n <= k + 1:
            raise PreconditionError(f"Need 1 <= k and n > k + 1, got n={args.n}, k={k}.")
    if any(t < 0 for t in args.tau_grid):
        raise PreconditionError("tau values must be non-negative.")
    table = tabulate_critvals(args.n, args.k_grid, args.tau_grid, args.alpha, cfg, args.which)
    head = provenance("critval", which=args.which, n=args.n, alpha=fmt(args.alpha), reps=cfg.reps,
                      seed=cfg.master_seed, rows="tau", columns="k")
    rows = [[fmt(t)] + [float(v) for v in row] for t, row in zip(args.tau_grid, table)]
    _emit(csv_text(head, ["tau"] + [str(k) for k in args.k_grid], rows), args.out)


def _tests(args, default):
    names = (args.tests or default).split(",")
    return [t.strip() for t in names if t.strip()]


def cmd_sim(args):
    os.makedirs(args.out, exist_ok=True)
    cfg = MCConfig(reps=args.crit_reps, alpha=args.alpha, master_seed=args.seed, threads=args.threads)
    if args.kind == "size":
        n = args.n or 100
        reps = args.reps or 10_000
        tests = _tests(args, "mclr,clr")
        delta2s = args.delta2 or [30.0]
        rows = []
        for rho, delta2, k in itertools.product(args.rho, delta2s, args.k):
            design = build_design(n, k, rho, delta2, args.beta0, args.design_seed, args.direction_seed)
            results = run_size(design, tests, reps, cfg)
            row = [fmt(rho), fmt(delta2), k, n]
            for res in results:
                row += [float(res.rejection_rate), float(res.mc_se)]
            rows.append(row)
        columns = ["rho", "delta2", "k", "n"] + [f"{t}_{c}" for t in tests for c in ("rate", "mc_se")]
        head = provenance("sim size", reps=reps, crit_reps=cfg.reps, alpha=fmt(cfg.alpha), seed=cfg.master_seed,
                          design_seed=args.design_seed, beta0=fmt(args.beta0),
                          pi2_direction="equal" if args.direction_seed is None else f"random:{args.direction_seed}")
        path = os.path.join(args.out, "size.csv")
        _emit(csv_text(head, columns, rows), path)
        sys.stdout.write(f"wrote {path}\n")
        return
    n = args.n or 200
    reps = args.reps or 2_500
    tests = _tests(args, "mclr,clr")
    if len(args.k) != 1 or len(args.rho) != 1 or (args.delta2 and len(args.delta2) != 1):
        raise PreconditionError("power runs take a single k, rho and delta2.")
    k, rho = args.k[0], args.rho[0]
    delta2 = args.delta2[0] if args.delta2 else 2.0 * k
    design = build_design(n, k, rho, delta2, args.beta0, args.design_seed, args.direction_seed)
    curve = run_power(design, args.delta_grid, tests, args.calib_reps, reps, cfg)
    head = provenance("sim power", n=n, k=k, rho=fmt(rho), delta2=fmt(delta2), beta0=fmt(args.beta0),
                      power_reps=reps, calib_reps=args.calib_reps, crit_reps=cfg.reps, alpha=fmt(cfg.alpha),
                      seed=cfg.master_seed, design_seed=args.design_seed, pi2_direction=design.direction,
                      calibrated_critical_values=" ".join(f"{t}={fmt(v)}" for t, v in curve.critical_values.items()))
    rows = []
    for j, delta in enumerate(curve.delta_grid):
        row = [float(delta)]
        for t in tests:
            row += [float(curve.rates[t][j]), float(curve.mc_se(t)[j])]
        rows.append(row)
    columns = ["delta"] + [f"{t}_{c}" for t in tests for c in ("rate", "mc_se")]
    path = os.path.join(args.out, "power.csv")
    _emit(csv_text(head, columns, rows), path)
    svg = os.path.join(args.out, "power.svg")
    power_svg(curve, svg, title=f"n={n}, k={k}, rho={fmt(rho)}, delta2={fmt(delta2)}")
    sys.stdout.write(f"wrote {path}\nwrote {svg}\n")


def cmd_diag(args):
    data = partial_out(read_iv_csv(args.data))
    stat = leverage_diag(thin_qr(data.Z))
    ratio = data.k / data.n_eff
    sys.stdout.write(f"n={data.n_eff} k={data.k} k/n={fmt(ratio)} leverage={fmt(stat)}\n")
    if stat > LEVERAGE_CAUTION:
        sys.stdout.write(
            "caution: (1/k) sum P_ii^2 is large; validity under non-normal errors relies on it being small.\n"
        )


COMMANDS = {"test": cmd_test, "critval": cmd_critval, "sim": cmd_sim, "diag": cmd_diag}


def main(argv=None):
    try:
        try:
            args = parse_args(argv)
        except SystemExit as exc:
            return exc.code
        COMMANDS[args.command](args)
    except CLIError as exc:
        print(f"mclr: error: {exc}", file=sys.stderr)
        return exc.code
    except InputError as exc:
        print(f"mclr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PreconditionError as exc:
        print(f"mclr: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (NotPositiveDefinite, MCLRError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"mclr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
