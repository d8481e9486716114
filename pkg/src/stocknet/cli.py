"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 data error, 4 numeric error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .dependence import gaussian_mi_value
from .errors import StocknetError
from .filtering import FILTERS
from .parallel import default_jobs

SUBCOMMAND_STAGES = {
    "run": ("ingest", "deps", "localize", "test", "sweep"),
    "ingest": ("ingest",),
    "deps": ("ingest", "deps"),
    "localize": ("ingest", "localize"),
    "surrogate-test": ("ingest", "test"),
    "sweep": ("ingest", "sweep"),
}


def _pipeline_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline options (override the config file)")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--manifest", help="ticker manifest (one ticker per line, TICKER.csv alongside)")
    g.add_argument("--start", help="first date of the ingest range (YYYY-MM-DD)")
    g.add_argument("--end", help="last date of the ingest range")
    g.add_argument("--period", help="analysis window START..END applied to returns")
    g.add_argument("--drop", action="append", help="ticker(s) to remove; repeat or comma-separate")
    g.add_argument("--normalize", choices=("on", "off"))
    g.add_argument("--bins", type=int, help="equiquantization bins Q")
    g.add_argument("--log-base", choices=("nats", "bits"))
    g.add_argument("--correction", choices=("gaussian", "subtract"))
    g.add_argument("--calib-replicates", type=int)
    g.add_argument("--surrogates", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--filter", choices=FILTERS)
    g.add_argument("--density", type=float, help="edge density for --filter wta")
    g.add_argument("--density-from", type=float)
    g.add_argument("--density-to", type=float)
    g.add_argument("--density-step", type=float)
    g.add_argument("--envelope", help="sweep band quantiles LO,HI (default 0,1 = min/max)")
    g.add_argument("--metrics", help="comma-separated global metrics")
    g.add_argument("--mask", choices=("correlation", "mi"), help="PMFG used to mask localization sums")
    g.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    g.add_argument("--out", help="output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stocknet",
                                 description="Quantify, localize and test nonlinearity in return-series networks.")
    sub = ap.add_subparsers(dest="command", required=True)
    flags = _pipeline_flags()
    helps = {"run": "full pipeline", "ingest": "load prices, write aligned log-returns",
             "deps": "dependence matrices and scatter data", "localize": "extranormal localization reports",
             "surrogate-test": "graph characteristics against FT surrogates",
             "sweep": "WTA density sweep with surrogate envelope"}
    for name, text in helps.items():
        sub.add_parser(name, parents=[flags], help=text)

    cb = sub.add_parser("copula-bench", help="block-copula ensemble check of the I_E estimate")
    cb.add_argument("--T", type=int, default=2608)
    cb.add_argument("--bins", type=int, default=4)
    cb.add_argument("--replicates", type=int, default=1000)
    cb.add_argument("--seed", type=int, default=0)
    cb.add_argument("--balanced", action="store_true", help="exactly half the draws in each block")
    cb.add_argument("--jobs", type=int)
    cb.add_argument("--out", default="out")

    ca = sub.add_parser("calib", help="build or inspect a bias calibration")
    ca.add_argument("--T", type=int, help="series length")
    ca.add_argument("--bins", type=int, default=4)
    ca.add_argument("--replicates", type=int, default=1000)
    ca.add_argument("--seed", type=int, default=0)
    ca.add_argument("--inspect", help="print a saved calibration JSON instead of building")
    ca.add_argument("--jobs", type=int)
    ca.add_argument("--out", default="out")
    return ap


def _overrides(args) -> dict:
    keys = ("manifest", "start", "end", "period", "normalize", "bins", "log_base", "correction",
            "calib_replicates", "surrogates", "seed", "filter", "density", "density_from", "density_to",
            "density_step", "envelope", "metrics", "mask", "jobs", "out")
    out = {k: getattr(args, k) for k in keys}
    if args.drop:
        out["drop"] = ",".join(args.drop)
    return out


def _print_calibration(calib) -> None:
    print(f"calibration {calib.key}")
    print(f"{'rho':>6} {'raw mean':>10} {'raw sd':>9} {'I_G':>9}  (nats)")
    sd = calib.raw_sd or (np.nan,) * len(calib.rho_grid)
    for r, m, s in zip(calib.rho_grid, calib.raw_mean, sd):
        print(f"{r:6.2f} {m:10.5f} {s:9.5f} {float(gaussian_mi_value(r)):9.5f}")


def _cmd_calib(args) -> int:
    from .mi import BiasCalibration, BinningSpec, build_bias_calibration
    if args.inspect:
        _print_calibration(BiasCalibration.load(args.inspect))
        return 0
    if args.T is None:
        raise SystemExit("calib: --T is required when building")
    calib = build_bias_calibration(BinningSpec(args.bins, args.T), replicates=args.replicates,
                                   seed=args.seed, jobs=args.jobs or default_jobs())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    calib.save(out / f"{calib.key}.json")
    _print_calibration(calib)
    return 0


def _cmd_copula(args) -> int:
    from .bench import copula_bench
    from .mi import BinningSpec
    BinningSpec(args.bins, args.T)
    res = copula_bench(args.T, args.bins, args.replicates, args.seed, jobs=args.jobs or default_jobs(),
                       balanced=args.balanced)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = res.report()
    (out / "copula_bench.json").write_text(json.dumps(res.summary(), sort_keys=True, indent=1) + "\n")
    (out / "copula_bench.txt").write_text(text + "\n")
    print(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "calib":
            return _cmd_calib(args)
        if args.command == "copula-bench":
            return _cmd_copula(args)
        from .pipeline import run
        ov = _overrides(args)
        if ov["jobs"] is None:
            ov["jobs"] = default_jobs()
        cfg = load_config(args.config, **ov)
        p = run(cfg, SUBCOMMAND_STAGES[args.command])
        print(f"{args.command}: wrote {len(p.written)} files to {p.out} (config_hash={p.hash})")
        return 0
    except StocknetError as exc:
        print(f"stocknet: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
