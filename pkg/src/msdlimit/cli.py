"""Command-line front end.  Every subcommand is a thin adapter over the library."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import asymptotics as asy
from . import mc_harness as mc
from .errors import DomainError, NumericalError
from .estimator import EstimateReport, Preset, fit_loglog, lag_presets
from .fractional_sim import SamplePath, simulate_path
from .inference import confidence_interval
from .model import LagScheme, ProcessModel
from .msd_core import msd_curve
from .plots import emit_plots
from .tracking_io import analyze_track, ingest_csv

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2


class _UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _add_model(p, require_seed=True):
    p.add_argument("--model", choices=["fbm", "ifou"], default="fbm")
    p.add_argument("--H", type=float, required=True, help="Hurst index in (0, 1)")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1.0, help="ifOU relaxation rate")
    if require_seed:
        p.add_argument("--seed", type=int, required=True)


def _add_lags(p):
    p.add_argument("--lags", type=_ints, help="explicit lags, e.g. 2,4,8")
    p.add_argument("--preset", choices=[x.value for x in Preset])
    p.add_argument("--h-min", type=int, default=2)
    p.add_argument("--h-max", type=int)


def _scheme(args) -> LagScheme:
    if args.lags:
        return LagScheme.from_lags(args.lags)
    if args.preset:
        return lag_presets(args.preset, args.h_min, args.h_max)
    raise DomainError("give --lags or --preset")


def _model(args) -> ProcessModel:
    if args.model == "fbm":
        return ProcessModel.fbm(args.H, sigma2=args.sigma2)
    return ProcessModel.ifou(args.H, lam=args.lam, sigma2=args.sigma2)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _read_path(fname) -> SamplePath:
    recs = ingest_csv(fname, "t", ("x",))
    if len(recs) != 1:
        raise DomainError("expected a single-path CSV with columns t,x")
    return recs[0].path("x")


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args):
    model = _model(args)
    out = _outdir(args)
    paths = [simulate_path(model, args.n, args.seed, i) for i in range(args.count)]
    for i, p in enumerate(paths):
        name = "path.csv" if args.count == 1 else f"path_{i:04d}.csv"
        _write(os.path.join(out, name), p.to_csv())
    if args.svg_lags:
        scheme = LagScheme.from_lags(args.svg_lags)
        emit_plots(out, curves=[msd_curve(p, scheme) for p in paths],
                   title=f"{model.kind.value} H={model.hurst}")
    print(f"simulated {args.count} {model.kind.value} path(s), n={args.n}, seed={args.seed} -> {out}")


def cmd_msd(args):
    curve = msd_curve(_read_path(args.input), _scheme(args))
    text = curve.to_csv()
    if args.out:
        _write(os.path.join(_outdir(args), "msd.csv"), text)
    else:
        sys.stdout.write(text)
    print(f"msd at {len(curve.lags)} lags", file=sys.stderr)


def cmd_fit(args):
    report = fit_loglog(msd_curve(_read_path(args.input), _scheme(args)))
    if args.out:
        _write(os.path.join(_outdir(args), "estimate.json"), report.to_json())
    else:
        print(report.to_json())
    print(f"alpha_hat={report.alpha_hat:.6f} H_hat={report.hurst_hat:.6f} "
          f"log_theta_hat={report.log_theta_hat:.6f}", file=sys.stderr)


def cmd_asympt(args):
    model = ProcessModel.fbm(args.alpha / 2.0, sigma2=args.theta)
    law = asy.asymptotic_law(model, args.weights or [1.0], args.n_quad)
    d = law.to_dict()
    if law.rosenblatt is not None:
        r = law.rosenblatt
        d["c_s"] = {str(s): asy.rosenblatt_cs(r, s) for s in range(2, 7)}
        qs = args.quantiles or [0.025, 0.975]
        d["quantiles_standardized"] = {
            repr(p): asy.rosenblatt_quantile(r, p, r.psi, args.tol) for p in qs
        }
    text = json.dumps(d, indent=2)
    if args.out:
        _write(os.path.join(_outdir(args), "asymptotic_law.json"), text)
    print(text)


def cmd_ci(args):
    with open(args.report) as fh:
        report = EstimateReport.from_dict(json.load(fh))
    n = args.n if args.n is not None else report.n
    if n is None:
        raise DomainError("path length --n is required")
    ci_a, ci_t = confidence_interval(report, int(n), args.h, args.level, args.weights)
    text = json.dumps({"alpha": ci_a.to_dict(), "log_theta": ci_t.to_dict()}, indent=2)
    if args.out:
        _write(os.path.join(_outdir(args), "ci.json"), text)
    print(text)
    print(f"alpha in [{ci_a.lower:.6f}, {ci_a.upper:.6f}] at level {args.level} "
          f"({ci_a.quantile_source} quantiles)", file=sys.stderr)


def _mc_configs(cfg: dict, seed):
    exp = cfg.get("experiment", "custom")
    master = seed if seed is not None else cfg.get("master_seed")
    if master is None:
        raise DomainError("a master seed is required (config master_seed or --seed)")
    reps = int(cfg.get("replications", 5000))
    return exp, int(master), reps


def cmd_mc(args):
    with open(args.config) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"config is not valid JSON: {exc}") from None
    exp, master, reps = _mc_configs(cfg, args.seed)
    workers = args.workers
    if exp == "table1":
        summ = mc.run_table1(reps, master, workers, tuple(cfg.get("ns", mc.TABLE1_NS)),
                             tuple(cfg.get("hursts", mc.TABLE1_HURSTS)))
    elif exp == "table2":
        summ = mc.run_table2(reps, master, workers, tuple(cfg.get("hursts", mc.TABLE1_HURSTS)),
                             float(cfg.get("lambda", 1.0)), int(cfg.get("n", 2**12)))
    elif exp == "histogram":
        model = ProcessModel.from_dict(cfg["model"])
        hist, summ = mc.run_msd_histogram(model, int(cfg.get("n", 2**10)), int(cfg.get("h", 1)),
                                          reps, master, workers)
    elif exp == "limit_check":
        model = ProcessModel.from_dict(cfg["model"])
        summ = mc.run_limit_check(model, int(cfg["n"]), mc._scheme_from_obj(cfg["scheme"]),
                                  reps, master, workers)
    elif exp == "pair_study":
        model = ProcessModel.from_dict(cfg["model"])
        summ = mc.run_pair_study(model, int(cfg.get("n", 2**10)), tuple(cfg.get("bases", mc.PAIR_BASES)),
                                 reps, master, workers)
    elif exp == "custom":
        cfg = dict(cfg, master_seed=master)
        summ = mc.run_experiment(mc.ExperimentConfig.from_dict(cfg), workers)
    else:
        raise DomainError(f"unknown experiment {exp!r}")
    run_id = cfg.get("run_id", exp)
    out = os.path.join(_outdir(args), run_id)
    summ.write(out)
    if exp == "histogram":
        emit_plots(out, histogram=hist, title=f"{model.kind.value} alpha={model.alpha}")
    print(f"{exp}: {len(summ.records)} records from {reps} replications -> {out}")


def cmd_ingest(args):
    recs = ingest_csv(args.input, args.time_col, args.axis_cols, args.id_col, args.delimiter)
    scheme = _scheme(args)
    result = {}
    for rec in recs:
        result[rec.particle_id] = {
            "delta": rec.delta,
            "n": int(rec.times.size - 1),
            "axes": [a.to_dict() for a in analyze_track(rec, scheme, args.level)],
        }
    text = json.dumps(result, indent=2)
    if args.out:
        _write(os.path.join(_outdir(args), "tracks.json"), text)
    print(text)
    print(f"analyzed {len(recs)} particle(s)", file=sys.stderr)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msdlimit", description="MSD-based anomalous diffusion analysis")
    p.add_argument("--help-json", action="store_true", help="print the flag reference as JSON")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate fBm or ifOU paths")
    _add_model(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--svg-lags", type=_ints, help="also write a log-log MSD plot over these lags")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("msd", help="pathwise MSD of a path CSV")
    s.add_argument("--input", required=True)
    _add_lags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_msd)

    s = sub.add_parser("fit", help="log-log least-squares fit")
    s.add_argument("--input", required=True)
    _add_lags(s)
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("asympt", help="limit-law constants and Rosenblatt quantiles")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--theta", type=float, default=1.0)
    s.add_argument("--weights", type=_floats)
    s.add_argument("--quantiles", type=_floats)
    s.add_argument("--n-quad", type=int, default=asy.DEFAULT_N_QUAD)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_asympt)

    s = sub.add_parser("ci", help="confidence intervals from an estimate JSON")
    s.add_argument("--report", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--h", type=int)
    s.add_argument("--weights", type=_floats)
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ci)

    s = sub.add_parser("mc", help="Monte Carlo experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="overrides the config master_seed")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("ingest", help="analyze a tracking CSV per particle and axis")
    s.add_argument("--input", required=True)
    s.add_argument("--time-col", default="t")
    s.add_argument("--axis-cols", type=lambda t: tuple(t.split(",")), default=("x",))
    s.add_argument("--id-col")
    s.add_argument("--delimiter", default=",")
    _add_lags(s)
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ingest)
    return p


def help_json(parser) -> dict:
    def flags(pp):
        return [
            {"flags": a.option_strings, "dest": a.dest, "required": a.required,
             "default": a.default if isinstance(a.default, (int, float, str, type(None))) else None,
             "help": a.help}
            for a in pp._actions if a.option_strings and a.dest not in ("help",)
        ]
    subs = {}
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            for name, pp in a.choices.items():
                subs[name] = flags(pp)
    return {"prog": parser.prog, "subcommands": subs}


def dispatch(argv=None) -> int:
    """Parse ``argv``, run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.help_json:
            print(json.dumps(help_json(parser), indent=2))
            return EXIT_OK
        if args.command is None:
            raise _UsageError("a subcommand is required")
        args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
