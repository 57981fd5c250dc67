"""Command-line entry point.

Subcommands: gen-signal, gen-matrix, recover, ric, lemmas, count, thm1, thm2,
gbounds, curve, theorem-suite. Every randomized command requires an explicit
--seed; there is no ambient entropy. Exit codes: 0 success, 1 check failure,
2 usage error. Indices in all artifacts are 1-based.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, experiments, recovery, sensing, signal_model

def _params_from_args(args, K: int, R: int) -> signal_model.PibsParams:
    if args.L is not None:
        return signal_model.PibsParams.from_window(
            n=args.n, b=args.b, p=args.p, l=args.l, L=args.L, K=K, R=R
        )
    if args.lsep is None:
        raise SystemExit("one of --L or --lsep is required")
    return signal_model.PibsParams(
        n=args.n, b=args.b, p=args.p, l=args.l, Lsep=args.lsep, K=K, R=R
    )


def _load_matrix(path: str) -> sensing.SensingMatrix:
    data = Path(path).read_bytes()
    if path.endswith(".bin"):
        return sensing.matrix_from_binary(data)
    return sensing.matrix_from_csv(data.decode())


def _save_matrix(mat: sensing.SensingMatrix, path: str) -> None:
    if path.endswith(".bin"):
        Path(path).write_bytes(sensing.matrix_to_binary(mat))
    else:
        Path(path).write_text(sensing.matrix_to_csv(mat), newline="\n")


def _cmd_gen_signal(args) -> int:
    params = _params_from_args(args, args.K, 0)
    rng = np.random.default_rng(args.seed)
    support = signal_model.sample_support(params, args.blocks, 0, rng)
    if args.scheme == "gaussian":
        sig = signal_model.fill_values(support, "gaussian", rng=rng)
    else:
        sig = signal_model.fill_values(support, "const", args.amplitude, rng)
    Path(args.out).write_text(signal_model.signal_to_csv(sig.x), newline="\n")
    if args.support_out:
        Path(args.support_out).write_text(
            signal_model.support_to_text(support), newline="\n"
        )
    return 0


def _cmd_gen_matrix(args) -> int:
    rng = np.random.default_rng(args.seed)
    mat = sensing.gaussian_matrix(
        args.m, args.n, args.variance, not args.no_normalize, rng,
        complex_entries=args.complex,
    )
    _save_matrix(mat, args.out)
    return 0


def _cmd_recover(args) -> int:
    Phi = _load_matrix(args.matrix)
    y = signal_model.signal_values_from_csv(Path(args.y).read_text(), Phi.m)
    meas = sensing.Measurement(y=y, noise_bound=args.noise_bound)
    if args.alg == "tsgbomp":
        result = recovery.tsgbomp(
            Phi, meas, K=args.K, L=args.L, b=args.b, p=args.p, epsilon=args.eps
        )
    else:
        result = recovery.bomp(
            Phi, meas, K=args.K, block=args.b * args.p, epsilon=args.eps
        )
    report = recovery.result_report(result)
    if args.out:
        Path(args.out).write_text(report, newline="\n")
    else:
        sys.stdout.write(report)
    if args.trace_csv:
        Path(args.trace_csv).write_text(recovery.trace_to_csv(result), newline="\n")
    return 0


def _cmd_ric(args) -> int:
    Phi = _load_matrix(args.matrix)
    params = signal_model.PibsParams(
        n=Phi.n, b=args.b, p=args.p, l=args.l, Lsep=args.lsep, K=args.K, R=args.R
    ) if args.L is None else signal_model.PibsParams.from_window(
        n=Phi.n, b=args.b, p=args.p, l=args.l, L=args.L, K=args.K, R=args.R
    )
    est = analysis.pibric(Phi, params, args.K, args.R, cap=args.cap, jobs=args.jobs)
    print(f"delta = {est.delta!r}")
    print(f"supports scanned = {est.supports_scanned}")
    if est.argmax_support is not None and not est.argmax_support.is_empty():
        print("argmax support:")
        sys.stdout.write(signal_model.support_to_text(est.argmax_support))
    return 0


def _cmd_lemmas(args) -> int:
    Phi = _load_matrix(args.matrix)
    params = signal_model.PibsParams(
        n=Phi.n, b=args.b, p=args.p, l=args.lsep, Lsep=args.lsep, K=args.K, R=args.R
    )
    rng = np.random.default_rng(args.seed)
    report = analysis.verify_lemmas(Phi, params, args.K, args.R, rng, cell_cap=args.cell_cap)
    sys.stdout.write(report.render())
    if args.margins_csv:
        Path(args.margins_csv).write_text(report.margins_csv(), newline="\n")
    return 0 if report.all_passed else 1


def _cmd_count(args) -> int:
    params = _params_from_args(args, args.K, args.R)
    if args.method == "enumerate":
        value = sum(1 for _ in signal_model.iter_cell(params, args.K, args.R))
    else:
        value = signal_model.count_supports_formula(params, args.K, args.R)
        ok, reasons = signal_model.formula_assumptions(params, args.K, args.R)
        if not ok:
            for reason in reasons:
                print(f"warning: {reason}", file=sys.stderr)
    print(value)
    return 0


def _cmd_thm1(args) -> int:
    cert = analysis.thm1_certificate(
        args.delta, args.K, args.b, args.p,
        epsilon=args.eps, x_min=args.xmin, x_max=args.xmax, field=args.field,
    )
    c18 = "18" if args.field == "real" else "20"
    c17 = "17" if args.field == "real" else "19"
    print(f"{'PASS' if cert.condition_17_ok else 'FAIL'}({c17}) margin={cert.margin_17!r}")
    print(f"{'PASS' if cert.condition_18_ok else 'FAIL'}({c18}) margin={cert.margin_18!r}")
    return 0 if cert.passed else 1


def _cmd_thm2(args) -> int:
    report = analysis.thm2_bound(
        args.b, args.p, args.L, args.K, args.R, args.m, args.n,
        eps0=args.eps0, eps=args.eps, lambda_variant=args.lambda_variant,
    )
    sys.stdout.write(report.render())
    if args.csv:
        Path(args.csv).write_text(report.csv(), newline="\n")
    return 0


def _cmd_gbounds(args) -> int:
    lower, upper = analysis.g_bounds(args.a, args.K, args.b)
    print(f"lower = {lower!r}")
    print(f"upper = {upper!r}")
    if args.trials:
        rng = np.random.default_rng(args.seed)
        emp = analysis.g_empirical(args.a, args.K, args.b, args.trials, rng)
        print(f"empirical = {emp!r}")
    return 0


def _cmd_curve(args) -> int:
    config = experiments.ExperimentConfig.from_text(Path(args.config).read_text())
    points = experiments.run_curve(config, jobs=args.jobs, out_path=args.out)
    if not args.out:
        sys.stdout.write(experiments.curve_to_csv(points))
    if args.check:
        violations = experiments.check_curve(points)
        for v in violations:
            print(f"check failure: {v}", file=sys.stderr)
        return 1 if violations else 0
    return 0


def _cmd_theorem_suite(args) -> int:
    rng = np.random.default_rng(args.seed)
    report = experiments.theorem_regime_suite(args.count, rng)
    sys.stdout.write(report.render())
    return 0 if report.all_recovered else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgbomp")
    sub = parser.add_subparsers(dest="command", required=True)

    def geometry(sp, with_n=True):
        if with_n:
            sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--b", type=int, required=True)
        sp.add_argument("--p", type=int, required=True)
        sp.add_argument("--l", type=int, default=0)
        sp.add_argument("--L", type=int, default=None)
        sp.add_argument("--lsep", type=int, default=None)

    sp = sub.add_parser("gen-signal", help="sample a support and fill values")
    geometry(sp)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--blocks", type=int, default=None)
    sp.add_argument("--scheme", choices=["const", "gaussian"], default="const")
    sp.add_argument("--amplitude", type=float, default=10.0)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--support-out", default=None)
    sp.set_defaults(func=_cmd_gen_signal)

    sp = sub.add_parser("gen-matrix", help="draw a Gaussian sensing matrix")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--variance", choices=["unit", "one_over_m"], default="unit")
    sp.add_argument("--no-normalize", action="store_true")
    sp.add_argument("--complex", action="store_true")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_gen_matrix)

    sp = sub.add_parser("recover", help="run a solver on a stored instance")
    sp.add_argument("--alg", choices=list(experiments.ALGORITHMS), default="tsgbomp")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--noise-bound", type=float, default=0.0)
    sp.add_argument("--out", default=None)
    sp.add_argument("--trace-csv", default=None)
    sp.set_defaults(func=_cmd_recover)

    sp = sub.add_parser("ric", help="exact structured isometry constant")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--l", type=int, default=0)
    sp.add_argument("--L", type=int, default=None)
    sp.add_argument("--lsep", type=int, default=None)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--R", type=int, required=True)
    sp.add_argument("--cap", type=int, default=1_000_000)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=_cmd_ric)

    sp = sub.add_parser("lemmas", help="brute-force lemma checks on a matrix")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--lsep", type=int, required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--R", type=int, required=True)
    sp.add_argument("--cell-cap", type=int, default=150_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--margins-csv", default=None)
    sp.set_defaults(func=_cmd_lemmas)

    sp = sub.add_parser("count", help="count admissible supports")
    geometry(sp)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--R", type=int, required=True)
    sp.add_argument("--method", choices=["formula", "enumerate"], default="formula")
    sp.set_defaults(func=_cmd_count)

    sp = sub.add_parser("thm1", help="evaluate the recovery certificate")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--xmin", type=float, default=1.0)
    sp.add_argument("--xmax", type=float, default=1.0)
    sp.add_argument("--field", choices=["real", "complex"], default="real")
    sp.set_defaults(func=_cmd_thm1)

    sp = sub.add_parser("thm2", help="Gaussian-matrix probability lower bound")
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--R", type=int, default=2)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--eps0", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument(
        "--lambda-variant", choices=["separation", "window"], default="separation"
    )
    sp.add_argument("--csv", default=None)
    sp.set_defaults(func=_cmd_thm2)

    sp = sub.add_parser("gbounds", help="magnitude-ratio tail bounds")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_gbounds)

    sp = sub.add_parser("curve", help="Monte Carlo phase-transition curve")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--check", action="store_true")
    sp.set_defaults(func=_cmd_curve)

    sp = sub.add_parser("theorem-suite", help="certified-instance validation")
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=_cmd_theorem_suite)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-signal" and args.blocks is None:
        args.blocks = args.K
    if args.command == "gbounds" and args.trials and args.seed is None:
        parser.error("--seed is required when --trials is set")
    try:
        return args.func(args)
    except (ValueError, signal_model.GeometryError, signal_model.EnumerationCapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
