import argparse
import json
import logging
import sys
from typing import Any

import pandas as pd
from pydantic import ValidationError

from fxnet import __version__
from fxnet.config import get_settings, load_run_config
from fxnet.errors import FxnetError, InputError, InvalidParameterError
from fxnet.models import Measure, RdcParams, ScaleConvention
from fxnet.pipeline import (
    EvolutionPipeline,
    collect_rankings,
    correlation_frame,
    degree_frame,
    effective_smoothing,
    load_run,
    maxgap_frame,
    rankings_frame,
    tailfit_document,
)
from fxnet.services.dependence import rdc
from fxnet.services.evolution import DEFAULT_CORRELATION_PAIRS, compare_rankings, gap_extremes_tail_fits, intracontinental_distribution
from fxnet.services.network import load_continents
from fxnet.services.returns import read_columns

logger = logging.getLogger("fxnet")

PLOT_KINDS = ("degrees", "maxgap", "intrafrac", "kde", "correlations", "tailfit")


def _add_rdc_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, help="random features per sample (default 10)")
    parser.add_argument("--reps", type=int, help="repetitions whose median is reported (default 5)")
    parser.add_argument("--ridge", type=float, help="ridge added to within-set covariances (default 1e-6)")
    parser.add_argument("--seed", type=int, help="64-bit seed of the projection streams (default 0)")
    parser.add_argument("--scale", choices=[c.value for c in ScaleConvention], help="projection scale convention")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fxnet", description="Nonlinear dependence networks of currency returns")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    rdc_cmd = commands.add_parser("rdc", help="RDC of two columns of a delimited file")
    rdc_cmd.add_argument("--input", required=True, help="delimited file with a header row")
    rdc_cmd.add_argument("--x", required=True, help="first column name")
    rdc_cmd.add_argument("--y", required=True, help="second column name")
    rdc_cmd.add_argument("--s", type=float, help="fixed projection scale (default: median heuristic)")
    rdc_cmd.add_argument("--delimiter", default="auto", help="auto, comma or tab")
    _add_rdc_flags(rdc_cmd)

    evolve = commands.add_parser("evolve", help="rolling-window MSTs and their evolution statistics")
    evolve.add_argument("--config", help="key = value run configuration file")
    evolve.add_argument("--input", help="rate table (date column + one column per currency)")
    evolve.add_argument("--input-base", dest="input_base", help="denomination of the input rates (default XAG)")
    evolve.add_argument("--base", help="base currency to re-denominate into (default XAG)")
    evolve.add_argument("--delimiter", help="auto, comma or tab")
    evolve.add_argument("--measure", choices=[m.value for m in Measure])
    evolve.add_argument("--window", type=int, help="window length in rows (default 100)")
    evolve.add_argument("--smoothing", type=int, help="networks per smoothed degree value (default 30)")
    evolve.add_argument("--continents", help="CCY,Continent mapping file")
    evolve.add_argument("--out", help="output directory (default fxnet_out)")
    evolve.add_argument("--year", type=int, help="restrict rankings.csv to one calendar year")
    evolve.add_argument("--jobs", type=int, help="worker processes (default: available CPUs)")
    _add_rdc_flags(evolve)

    rank = commands.add_parser("rank", help="degree rankings from a finished run")
    rank.add_argument("--out", required=True, help="evolve output directory")
    rank.add_argument("--year", type=int)
    rank.add_argument("--baseline", help="second run directory whose ranks are shown alongside")

    plot = commands.add_parser("plotdata", help="plot-ready CSV from a finished run")
    plot.add_argument("--out", required=True, help="evolve output directory")
    plot.add_argument("--kind", choices=PLOT_KINDS, default="degrees")
    plot.add_argument("--currencies", help="comma-separated codes (degrees, correlations)")
    plot.add_argument("--smoothing", type=int)
    plot.add_argument("--continents", help="CCY,Continent mapping file")

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def cmd_rdc(args: argparse.Namespace) -> int:
    columns = read_columns(args.input, [args.x, args.y], delimiter=_delimiter(args.delimiter))
    overrides = {"k": args.k, "repetitions": args.reps, "ridge": args.ridge, "seed": args.seed, "s": args.s, "scale": args.scale}
    try:
        params = RdcParams(**{key: value for key, value in overrides.items() if value is not None})
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in exc.errors())
        raise InvalidParameterError(f"Invalid RDC parameters: {problems}") from exc
    result = rdc(columns[args.x], columns[args.y], params)
    print(f"rdc,{result.value:.6g}")
    for index, value in enumerate(result.repetitions):
        print(f"repetition,{index},{value:.6g}")
    if result.degenerate:
        print("degenerate,true")
    return 0


def _delimiter(value: str) -> str:
    return {"comma": ",", "tab": "\t", "\\t": "\t"}.get(value.strip().lower(), value)


def cmd_evolve(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {
        "input": args.input,
        "input_base": args.input_base,
        "base": args.base,
        "delimiter": args.delimiter,
        "measure": args.measure,
        "window": args.window,
        "smoothing": args.smoothing,
        "k": args.k,
        "repetitions": args.reps,
        "ridge": args.ridge,
        "seed": args.seed,
        "scale": args.scale,
        "continents": args.continents,
        "out": args.out,
        "year": args.year,
        "jobs": args.jobs,
    }
    config = load_run_config(args.config, overrides)
    result = EvolutionPipeline().run(config)
    print(f"networks,{len(result.series)}")
    print(f"out,{result.out_dir}")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    _, series = load_run(args.out)
    rankings = collect_rankings(series, args.year)
    if args.baseline is None:
        _write(rankings_frame(rankings))
        return 0

    _, baseline_series = load_run(args.baseline)
    baseline = {ranking.period: ranking for ranking in collect_rankings(baseline_series, args.year)}
    rows = []
    for ranking in rankings:
        if ranking.period not in baseline:
            continue
        for rank, currency, avg_degree, baseline_rank in compare_rankings(ranking, baseline[ranking.period]):
            rows.append((ranking.period, rank, currency, avg_degree, baseline_rank))
    frame = pd.DataFrame(rows, columns=["period", "rank", "currency", "avg_degree", "baseline_rank"])
    frame["baseline_rank"] = frame["baseline_rank"].astype("Int64")
    _write(frame)
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    manifest, series = load_run(args.out)
    smoothing = effective_smoothing(args.smoothing or int(manifest["config"]["smoothing"]), len(series))
    currencies = [series.require(code) for code in args.currencies.split(",")] if args.currencies else None

    if args.kind == "degrees":
        _write(degree_frame(series, currencies or series.currencies, smoothing))
    elif args.kind == "maxgap":
        _write(maxgap_frame(series, smoothing))
    elif args.kind == "correlations":
        if currencies:
            if len(currencies) != 2:
                raise InputError("--currencies must name exactly two codes for correlations")
            pairs = [tuple(currencies)]
        else:
            pairs = [(a, b) for a, b in DEFAULT_CORRELATION_PAIRS if {a, b} <= set(series.currencies)]
        _write(correlation_frame(series, pairs, smoothing))
    elif args.kind == "tailfit":
        print(json.dumps(tailfit_document(gap_extremes_tail_fits(series)), indent=2))
    else:
        mapping = load_continents(args.continents or manifest["config"].get("continents") or get_settings().continents_path)
        distribution = intracontinental_distribution(series, mapping)
        if args.kind == "intrafrac":
            _write(pd.DataFrame({"date": distribution.dates, "fraction": distribution.fractions}))
        else:
            _write(pd.DataFrame({"x": distribution.grid, "density": distribution.density}))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("fxnet.main:app", host=args.host, port=args.port, log_level=get_settings().log_level.lower())
    return 0


def _write(frame: pd.DataFrame) -> None:
    frame.to_csv(sys.stdout, index=False, float_format="%.6g", lineterminator="\n")


COMMANDS = {
    "rdc": cmd_rdc,
    "evolve": cmd_evolve,
    "rank": cmd_rank,
    "plotdata": cmd_plotdata,
    "serve": cmd_serve,
}


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(get_settings().log_level)
    try:
        return COMMANDS[args.command](args)
    except FxnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        logger.exception("command=%s status=failed", args.command)
        return 1
