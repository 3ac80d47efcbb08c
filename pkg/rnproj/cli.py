"""
Command line front end.

    rnproj estimate-moment --payoff svix --quotes quotes.json
    rnproj estimate-distribution --quotes chain.csv --gross-rate 1.01 --rearrange
    rnproj fx-corr --market fx.json
    rnproj clean --input raw.csv --output clean.csv
    rnproj fx-smile --pillars pillars.csv
    rnproj experiments run --study sector_mse --seed 7 --out results/sector

Errors are reported on stderr; the exit code is 0 on success, 2 for invalid
input and 3 for numerical failures.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict

import pandas as pd

from config import settings

from . import __version__
from .experiments.config import STUDIES
from .experiments.runner import run_experiment
from .ingest.chain import check_parity, clean_chain, read_chain_csv, write_chain_csv
from .ingest.files import load_fx_market_json, load_quotes
from .ingest.fx_smile import expand_fx_smile, read_fx_pillars_csv
from .service import distribution_report, fx_report, moment_report
from .utils.errors import RnprojError

logger = logging.getLogger(__name__)


def _emit(text: str, output=None):
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"Wrote {output}")
    else:
        sys.stdout.write(text)


def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_estimate_moment(args) -> int:
    quotes, info = load_quotes(args.quotes, args.gross_rate)
    if args.maturity is not None:
        info["maturity"] = args.maturity
    if args.spot is not None:
        info["spot"] = args.spot
    report = moment_report(
        args.payoff, quotes, info, bounds=args.bounds, grid_points=args.grid_points,
        wls_scale=args.wls_scale, nonneg=args.nonneg, weight_floor=args.weight_floor,
    )
    report["config"]["quotes"] = str(args.quotes)
    _emit(_dump(report), args.output)
    return 0


def cmd_estimate_distribution(args) -> int:
    quotes, _ = load_quotes(args.quotes, args.gross_rate)
    dist = distribution_report(quotes, bounds=args.bounds, eval_points=args.eval_points,
                               rearrange=args.rearrange)
    if args.output:
        dist.to_csv(args.output)
        logger.info(f"Wrote {args.output}")
    else:
        dist.to_csv(sys.stdout)
    return 0


def cmd_fx_corr(args) -> int:
    market = load_fx_market_json(args.market)
    report = fx_report(market, bounds1=args.bounds1, bounds2=args.bounds2,
                       grid_points=args.grid_points, q1=args.q1, q2=args.q2)
    report["config"]["market"] = str(args.market)
    _emit(_dump(report), args.output)
    return 0


def cmd_clean(args) -> int:
    rows = read_chain_csv(args.input)
    chains = clean_chain(rows, args.gross_rate)
    if args.check_parity:
        rate = args.gross_rate
        for key, chain in chains.items():
            group = [r for r in rows if (r.date, r.expiry) == key]
            if rate is None:
                logger.warning(f"{key[0]} / {key[1]}: parity check needs --gross-rate")
                continue
            check_parity(group, chain.forward, rate)
    write_chain_csv(chains, args.output or sys.stdout)
    return 0


def cmd_fx_smile(args) -> int:
    records = []
    for pillar in read_fx_pillars_csv(args.pillars):
        for quote in expand_fx_smile(pillar):
            records.append({"date": pillar.date, "tenor": pillar.tenor, "pair": pillar.pair, **asdict(quote)})
    frame = pd.DataFrame(records)
    frame.to_csv(args.output or sys.stdout, index=False, float_format="%.12g")
    return 0


def cmd_experiments_run(args) -> int:
    out = run_experiment(study=args.study, config_path=args.config, seed=args.seed,
                         out_dir=args.out, threads=args.threads)
    print(f"Wrote results to {out}")
    return 0


# ============================================================================
# PARSER
# ============================================================================

def _add_experiment_arguments(parser):
    parser.add_argument("--study", choices=STUDIES, help="Study to run with its shipped configuration")
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="Root seed (overrides the configuration)")
    parser.add_argument("--out", help="Output directory for results.csv, summary.csv and meta.json")
    parser.add_argument("--threads", type=int, help=f"Worker threads (default {settings.THREADS})")
    parser.set_defaults(func=cmd_experiments_run)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnproj", description="Risk-neutral moments by payoff projection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    moment = commands.add_parser("estimate-moment", help="Projection estimate of E[g(S_T)]")
    moment.add_argument("--payoff", required=True, help="svix, vix, power:n, indicator:x or file:<csv>")
    moment.add_argument("--quotes", required=True, help="JSON quote file or option chain CSV")
    moment.add_argument("--gross-rate", type=float, help="Gross risk-free return (required for CSV chains)")
    moment.add_argument("--bounds", type=float, nargs=2, metavar=("A_MIN", "A_MAX"))
    moment.add_argument("--grid-points", type=int, help=f"Grid size (default {settings.DEFAULT_GRID_POINTS})")
    moment.add_argument("--wls-scale", type=float, help="Cauchy weight scale for weighted least squares")
    moment.add_argument("--nonneg", action="store_true", help="Constrain the fitted payoff to be nonnegative")
    moment.add_argument("--weight-floor", type=float, help="Lower bound -c on the portfolio weights")
    moment.add_argument("--spot", type=float, help="Spot, for the VIX level")
    moment.add_argument("--maturity", type=float, help="Maturity in years, for SVIX/VIX levels")
    moment.add_argument("--output", help="Write JSON here instead of stdout")
    moment.set_defaults(func=cmd_estimate_moment)

    dist = commands.add_parser("estimate-distribution", help="Risk-neutral CDF and PDF")
    dist.add_argument("--quotes", required=True)
    dist.add_argument("--gross-rate", type=float)
    dist.add_argument("--bounds", type=float, nargs=2, metavar=("A_MIN", "A_MAX"))
    dist.add_argument("--eval-points", type=int, help=f"Evaluation points (default {settings.DEFAULT_EVAL_POINTS})")
    dist.add_argument("--rearrange", action="store_true", help="Monotone rearrangement of the CDF")
    dist.add_argument("--output", help="Write CSV here instead of stdout")
    dist.set_defaults(func=cmd_estimate_distribution)

    fx = commands.add_parser("fx-corr", help="Correlation and joint tail of two dollar exchange rates")
    fx.add_argument("--market", required=True, help="JSON FX market (two legs and the cross)")
    fx.add_argument("--bounds1", type=float, nargs=2)
    fx.add_argument("--bounds2", type=float, nargs=2)
    fx.add_argument("--grid-points", type=int,
                    help=f"Points per leg (default {settings.DEFAULT_JOINT_GRID_POINTS})")
    fx.add_argument("--q1", type=float, help="Tail threshold on S1 (lowest strike by default)")
    fx.add_argument("--q2", type=float, help="Tail threshold on S2 (lowest strike by default)")
    fx.add_argument("--output")
    fx.set_defaults(func=cmd_fx_corr)

    clean = commands.add_parser("clean", help="Clean a raw option chain CSV")
    clean.add_argument("--input", required=True)
    clean.add_argument("--output")
    clean.add_argument("--gross-rate", type=float, help="Used for parity forwards and the parity check")
    clean.add_argument("--check-parity", action="store_true", help="Log put-call parity deviations")
    clean.set_defaults(func=cmd_clean)

    smile = commands.add_parser("fx-smile", help="Expand FX smile pillars to strikes and prices")
    smile.add_argument("--pillars", required=True)
    smile.add_argument("--output")
    smile.set_defaults(func=cmd_fx_smile)

    _add_experiment_arguments(commands.add_parser("simulate", help="Run a simulation study"))
    experiments = commands.add_parser("experiments", help="Simulation studies")
    actions = experiments.add_subparsers(dest="action", required=True)
    _add_experiment_arguments(actions.add_parser("run", help="Run a simulation study"))
    return parser


# ============================================================================
# MAIN
# ============================================================================

def main(argv=None) -> int:
    """Parse arguments, run the command and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.LOG_LEVEL,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RnprojError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
