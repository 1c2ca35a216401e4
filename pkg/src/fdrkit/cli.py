"""Command-line entry point: ``fdrkit <subcommand> [flags]``.

Every output file starts with the run configuration (a ``#`` comment line in
CSV files, a ``"config"`` key in JSON files) so results can be regenerated.
Exit status is 0 on success, 2 for usage or configuration errors and 1 for
failures while running.
"""

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .density import DEFAULT_DEGREE
from .enrich import DEFAULT_B, METHODS, enrich_collection, load_expression, read_gmt
from .errors import ConfigError, ExtrapolationWarning, FdrkitError
from .fdr import DEFAULT_FDR_THRESHOLD, analyze, power_report
from .ingest import (ZSample, binom_to_z, load_columns, load_zvalues, p_to_z, read_table,
                     save_table, t_to_z)
from .nullfit import theoretical_null
from .onegroup import (PriorMixture, convolve_prior, derivatives_at_zero,
                       posterior_cumulants_zero, taylor_null, taylor_p0)
from .selectci import INTERVAL_MODES, fcr_intervals
from .sim import DEFAULT_REPS, EXPERIMENTS, run_experiment

SIDES = ("left", "right", "two")
NULL_METHODS = ("theoretical", "geometric", "analytic")
_ALTERNATIVE = {"two": "two-sided", "right": "greater", "left": "less"}


@dataclass
class RunConfig:
    """Everything needed to reproduce one invocation."""

    subcommand: str
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    seed: int | None = None
    version: str = __version__

    def to_dict(self):
        return asdict(self)

    def comment(self):
        return "fdrkit config: " + json.dumps(self.to_dict(), sort_keys=True)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    # JSON has no NaN/inf; write them as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def write_json(path, payload, config):
    body = {"config": config.to_dict(), **payload}
    Path(path).write_text(json.dumps(_clean(body), indent=2, default=_json_default) + "\n",
                          encoding="utf-8")


def write_csv(path, rows, header, config, digits=6):
    save_table(path, rows, header, comments=[config.comment()], digits=digits)


def resolve_seed(seed):
    """Explicit seed, else ``FDRKIT_SEED``, else fresh entropy (recorded in outputs)."""
    if seed is not None:
        return seed
    env = os.environ.get("FDRKIT_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FDRKIT_SEED must be an integer, got {env!r}") from None
    return int(np.random.SeedSequence().entropy % 2 ** 64)


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_unit(name, value, closed_right=False):
    if value is None:
        return
    ok = 0 < value <= 1 if closed_right else 0 < value < 1
    if not ok:
        raise ConfigError(f"{name} must lie in (0, 1{']' if closed_right else ')'}, got {value}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args):
    _check_unit("--q", args.q)
    _check_unit("--p0", args.p0, closed_right=True)
    _check_unit("--fdr-threshold", args.fdr_threshold, closed_right=True)
    if args.bins is not None and args.bins < 10:
        raise ConfigError("--bins must be at least 10")
    sample = load_zvalues(args.__dict__["in"], args.column)
    out = _out_dir(args)
    names = ["fdr.csv", "null.json", "power.json", "curve.csv"]
    config = RunConfig("fit", {"z": str(args.__dict__["in"])}, [str(out / n) for n in names],
                       {"null": args.null, "p0": args.p0, "bins": args.bins, "degree": args.degree,
                        "basis": args.basis, "q": args.q, "fdr_threshold": args.fdr_threshold,
                        "side": args.side})
    kw = dict(bins=args.bins, degree=args.degree, basis=args.basis, q=args.q,
              threshold=args.fdr_threshold, side=args.side)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        res = analyze(sample, null=args.null, p0=args.p0, **kw)
        theo = res if args.null == "theoretical" else analyze(
            sample, null=theoretical_null(1.0 if args.p0 is None else args.p0), **kw)
        power = power_report(sample.values, res.fit, res.null, args.fdr_threshold)
        fit = res.fit
        mids = fit.midpoints
        fitted_counts = fit.fitted
        null_counts = res.null.p0 * fit.N * fit.width * res.null.pdf(mids)
        theo_counts = theo.null.p0 * fit.N * fit.width * theo.null.pdf(mids)

    header = ["id", "z", "fdr", "Fdr_left", "Fdr_right", "selected_bh", "selected_fdr20"]
    write_csv(out / "fdr.csv", res.rows(), header, config)
    write_json(out / "null.json", {
        "null": res.null.to_dict(),
        "theoretical": theo.null.to_dict(),
        "density": {"basis": fit.basis, "degree": fit.degree, "bins": int(fit.counts.size),
                    "width": fit.width, "range": list(fit.range), "deviance": fit.deviance,
                    "iterations": fit.iterations},
    }, config)
    write_json(out / "power.json", {
        "efdr1": power.efdr1, "n_fdr_left": power.n_left, "n_fdr_right": power.n_right,
        "fdr_threshold": args.fdr_threshold, "n_bh": int(res.selected_bh.sum()), "q": args.q,
        "theoretical": {"n_fdr": int(theo.selected_fdr.sum()), "n_bh": int(theo.selected_bh.sum())},
    }, config)
    rows = zip(mids, fit.counts, fitted_counts, null_counts, np.minimum(null_counts / fitted_counts, 1.0),
               power.nonnull, theo_counts)
    write_csv(out / "curve.csv", rows,
              ["midpoint", "count", "fitted", "null_expected", "fdr", "nonnull", "theoretical_null_expected"],
              config)

    n = res.null
    print(f"{'':14}{'delta0':>10}{'sigma0':>10}{'p0':>10}{'fdr<=' + format(args.fdr_threshold, 'g'):>10}"
          f"{'BH(' + format(args.q, 'g') + ')':>10}")
    for label, r in ((n.method, res), ("theoretical", theo)):
        print(f"{label:14}{r.null.delta0:10.4f}{r.null.sigma0:10.4f}{r.null.p0:10.4f}"
              f"{int(r.selected_fdr.sum()):10d}{int(r.selected_bh.sum()):10d}")
    print(f"Efdr(1) = {power.efdr1:.3f}")
    return 0


def cmd_transform(args):
    path = args.__dict__["in"]
    header, rows, _ = read_table(path)
    ids = [r[header.index("id")] for r in rows] if "id" in header else None
    if args.kind == "t":
        if args.df is None:
            raise ConfigError("--df is required for --kind t")
        z = t_to_z(load_columns(path, ["t"])["t"], args.df)
    elif args.kind == "p":
        cols = load_columns(path, ["p"] + (["sign"] if "sign" in header else []))
        z = p_to_z(cols["p"], cols.get("sign"), two_sided=args.side == "two")
    else:
        c = load_columns(path, ["p_ad", "n_ad", "p_dis", "n_dis"])
        z = binom_to_z(c["p_ad"], c["n_ad"], c["p_dis"], c["n_dis"], args.delta)
    sample = ZSample(np.atleast_1d(z), ids)
    out = _out_dir(args)
    config = RunConfig("transform", {"table": str(path)}, [str(out / "z.csv")],
                       {"kind": args.kind, "df": args.df, "delta": args.delta, "side": args.side})
    write_csv(out / "z.csv", zip(sample.labels(), sample.values), ["id", "z"], config, digits=17)
    print(f"wrote {sample.N} z-values to {out / 'z.csv'}")
    return 0


def cmd_simulate(args):
    if args.experiment is None:
        raise ConfigError("--experiment is required")
    seed = resolve_seed(args.seed)
    reps = DEFAULT_REPS.get(args.experiment) if args.reps is None else args.reps
    out = _out_dir(args)
    config = RunConfig("simulate", {}, [str(out / "report.json"), str(out / "records.csv")],
                       {"experiment": args.experiment, "reps": reps}, seed)
    report = run_experiment(args.experiment, reps, seed)
    payload = report.to_dict()
    write_json(out / "report.json", payload, config)
    if report.records:
        header = list(report.records[0].keys())
        write_csv(out / "records.csv", report.records, header, config, digits=10)
    print(json.dumps(_clean(report.aggregates), indent=2))
    return 0


def cmd_enrich(args):
    if args.sets is None:
        raise ConfigError("--sets is required")
    method = args.method or "rowrand"
    if method != "rowrand" and (args.matrix is None or args.design is None):
        raise ConfigError(f"--method {method} needs --matrix and --design")
    if args.matrix is None and args.__dict__["in"] is None:
        raise ConfigError("need --matrix/--design or --in z-values")
    seed = resolve_seed(args.seed)
    B = DEFAULT_B if args.B is None else args.B
    matrix = load_expression(args.matrix, args.design) if args.matrix else None
    z = load_zvalues(args.__dict__["in"]) if args.__dict__["in"] else None
    sets = read_gmt(args.sets)
    out = _out_dir(args)
    config = RunConfig("enrich", {"matrix": args.matrix, "design": args.design, "sets": args.sets,
                                  "z": args.__dict__["in"]},
                       [str(out / "enrich.csv")], {"method": method, "B": B, "side": args.side}, seed)
    results = enrich_collection(sets, method, z=z, matrix=matrix, B=B, seed=seed,
                                alternative=_ALTERNATIVE[args.side])
    header = ["set", "m", "observed", "method", "B", "p_value", "alternative", "null_mean", "null_sd",
              "exhaustive", "replace"]
    write_csv(out / "enrich.csv", (r.to_dict() for r in results), header, config)
    for r in results:
        print(f"{r.name:30} m={r.m:<5d} stat={r.observed: .4f} p={r.p_value:.4f}")
    return 0


def cmd_onegroup(args):
    path = args.__dict__["in"]
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    prior = PriorMixture.from_dict(spec)
    cum = posterior_cumulants_zero(prior)
    f0 = float(convolve_prior(prior, 0.0))
    deriv = derivatives_at_zero(lambda t: convolve_prior(prior, t), J=3)
    nulls = {}
    for J in (0, 1, 2):
        try:
            nulls[f"J{J}"] = taylor_null(cum, f0, J).to_dict()
        except FdrkitError as exc:
            nulls[f"J{J}"] = {"error": str(exc)}
    try:
        nulls["J3"] = {"p0": taylor_p0(cum, f0, 3)}
    except FdrkitError as exc:
        nulls["J3"] = {"error": str(exc)}
    out = _out_dir(args)
    config = RunConfig("onegroup", {"prior": str(path)}, [str(out / "onegroup.json")])
    payload = {
        "prior": prior.to_dict(),
        "f_at_0": f0,
        "cumulants": {"E0": cum.E0, "V0": cum.V0, "S0": cum.S0, "Vbar0": cum.Vbar0},
        "numerical_derivatives": {"l1": deriv[1], "minus_l2": -deriv[2], "l3": deriv[3]},
        "taylor_nulls": nulls,
    }
    write_json(out / "onegroup.json", payload, config)
    print(json.dumps(_clean(payload["cumulants"]), indent=2))
    return 0


def cmd_intervals(args):
    _check_unit("--q", args.q)
    sample = load_zvalues(args.__dict__["in"], args.column)
    truth = load_columns(args.truth, [args.truth_column])[args.truth_column] if args.truth else None
    out = _out_dir(args)
    config = RunConfig("intervals", {"z": str(args.__dict__["in"]), "truth": args.truth},
                       [str(out / "intervals.csv"), str(out / "intervals.json")],
                       {"q": args.q, "side": args.side, "interval_mode": args.interval_mode})
    iv = fcr_intervals(sample, args.q, args.side, args.interval_mode, truth)
    header = ["id", "z", "lo", "hi"] + (["covered"] if truth is not None else [])
    write_csv(out / "intervals.csv", iv.rows(), header, config)
    write_json(out / "intervals.json", iv.summary(), config)
    print(f"R = {iv.R}, half-width = {iv.half_width:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fdrkit", description="Local false discovery rate toolkit.")
    p.add_argument("--version", action="version", version=f"fdrkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_in=True):
        sp.add_argument("--in", required=need_in, default=None, metavar="PATH")
        sp.add_argument("--out", default=".", metavar="DIR", help="output directory (created if missing)")

    sp = sub.add_parser("fit", help="per-case fdr, null estimate and plotting curves")
    common(sp)
    sp.add_argument("--column", default=None, help="value column of a headed CSV")
    sp.add_argument("--null", choices=NULL_METHODS, default="geometric")
    sp.add_argument("--p0", type=float, default=None)
    sp.add_argument("--bins", type=int, default=None)
    sp.add_argument("--degree", type=int, default=DEFAULT_DEGREE)
    sp.add_argument("--basis", choices=("polynomial", "spline"), default="polynomial")
    sp.add_argument("--q", type=float, default=0.1)
    sp.add_argument("--fdr-threshold", type=float, default=DEFAULT_FDR_THRESHOLD)
    sp.add_argument("--side", choices=SIDES, default="two")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("transform", help="t, p or binomial statistics to z-values")
    common(sp)
    sp.add_argument("--kind", choices=("t", "p", "binom"), default="t")
    sp.add_argument("--df", type=float, default=None)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--side", choices=SIDES, default="left",
                    help="for p-values: 'two' treats them as two-sided")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    common(sp, need_in=False)
    sp.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    sp.add_argument("--reps", type=int, default=None)
    sp.add_argument("--seed", type=_u64, default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("enrich", help="gene-set enrichment p-values")
    common(sp, need_in=False)
    sp.add_argument("--matrix", default=None)
    sp.add_argument("--design", default=None)
    sp.add_argument("--sets", default=None)
    sp.add_argument("--method", choices=METHODS, default=None)
    sp.add_argument("--B", type=int, default=None)
    sp.add_argument("--seed", type=_u64, default=None)
    sp.add_argument("--side", choices=SIDES, default="two")
    sp.set_defaults(func=cmd_enrich)

    sp = sub.add_parser("onegroup", help="posterior cumulants and Taylor nulls of a prior")
    common(sp)
    sp.set_defaults(func=cmd_onegroup)

    sp = sub.add_parser("intervals", help="FCR-controlling intervals for BH-selected cases")
    common(sp)
    sp.add_argument("--column", default=None)
    sp.add_argument("--q", type=float, default=0.05)
    sp.add_argument("--side", choices=SIDES, default="two")
    sp.add_argument("--interval-mode", choices=INTERVAL_MODES, default="paper")
    sp.add_argument("--truth", default=None, help="CSV with the true parameters")
    sp.add_argument("--truth-column", default="mu")
    sp.set_defaults(func=cmd_intervals)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fdrkit: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FdrkitError, OSError, ValueError) as exc:
        print(f"fdrkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
