import logging
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd

from fxnet import __version__
from fxnet.config import Settings, get_settings
from fxnet.errors import ConfigurationError, InvalidParameterError
from fxnet.models import RunConfig
from fxnet.services.evolution import (
    DEFAULT_CORRELATION_PAIRS,
    GapExtremes,
    NetworkSeries,
    Ranking,
    average_degree_ranking,
    degree_correlation_table,
    gap_extremes_tail_fits,
    intracontinental_distribution,
    max_degree_gap,
    max_degree_gap_series,
    raw_degree_series,
    rolling_networks,
    smoothed_degree_series,
    yearly_rankings,
)
from fxnet.services.network import full_graph_intracontinental_fraction, load_continents
from fxnet.services.returns import log_returns, parse_rates, redenominate
from fxnet.storage import RunStorage, StagedRun

logger = logging.getLogger(__name__)


@dataclass
class EvolutionResult:
    out_dir: Path
    series: NetworkSeries
    manifest: dict[str, Any]
    timings_ms: dict[str, int]


class EvolutionPipeline:
    """parse -> redenominate -> log returns -> rolling networks -> result files."""

    def __init__(self, settings: Settings | None = None):
        self.settings = settings or get_settings()

    def run(self, config: RunConfig) -> EvolutionResult:
        if config.input is None:
            raise ConfigurationError("no input file given")
        overall_start = time.perf_counter()

        parse_start = time.perf_counter()
        table = parse_rates(config.input, base=config.input_base, delimiter=config.delimiter)
        table = redenominate(table, config.base)
        returns = log_returns(table)
        parse_ms = elapsed_ms(parse_start)

        networks_start = time.perf_counter()
        series = rolling_networks(returns, config.window, config.measure, config.rdc_params, jobs=config.jobs)
        networks_ms = elapsed_ms(networks_start)
        if not series.entries:
            raise InvalidParameterError("no window has at least two currencies with complete returns")

        mapping = load_continents(config.continents or self.settings.continents_path)
        smoothing = effective_smoothing(config.smoothing, len(series))

        write_start = time.perf_counter()
        with StagedRun(config.out) as run:
            for entry in series.entries:
                run.save_tree(entry)
            run.save_frame("edges.csv", edges_frame(series))
            run.save_frame("rankings.csv", rankings_frame(collect_rankings(series, config.year)))
            run.save_frame("degree_series.csv", degree_frame(series, series.currencies, smoothing))
            run.save_frame("maxgap.csv", maxgap_frame(series, smoothing))

            distribution = intracontinental_distribution(series, mapping)
            run.save_frame("intrafrac.csv", pd.DataFrame({"date": distribution.dates, "fraction": distribution.fractions}))
            run.save_frame("intrafrac_kde.csv", pd.DataFrame({"x": distribution.grid, "density": distribution.density}))

            pairs = [(a, b) for a, b in DEFAULT_CORRELATION_PAIRS if {a, b} <= set(series.currencies)]
            run.save_frame("degree_correlations.csv", correlation_frame(series, pairs, smoothing))
            run.save_json("tailfits.json", tailfit_document(gap_extremes_tail_fits(series)))
            manifest = {
                "version": __version__,
                "seed": config.seed,
                "config": config.model_dump(mode="json", exclude={"out", "jobs"}),
                "counts": {
                    "rate_rows": int(table.dates.size),
                    "return_rows": len(returns),
                    "currencies": len(returns.currencies),
                    "windows": len(returns) - config.window + 1,
                    "networks": len(series),
                },
                "smoothing_used": smoothing,
                "intracontinental": {
                    "full_graph": full_graph_intracontinental_fraction(returns.currencies, mapping),
                    "mst_mean": distribution.mean,
                    "mst_std": distribution.std,
                },
            }
            run.save_json("manifest.json", manifest)

        timings_ms = {
            "parse_ms": parse_ms,
            "networks_ms": networks_ms,
            "write_ms": elapsed_ms(write_start),
            "total_ms": elapsed_ms(overall_start),
        }

        logger.info(
            "out=%s networks=%d measure=%s parse_ms=%d networks_ms=%d write_ms=%d total_ms=%d",
            config.out, len(series), config.measure, parse_ms, networks_ms, timings_ms["write_ms"], timings_ms["total_ms"],
        )
        return EvolutionResult(out_dir=Path(config.out), series=series, manifest=manifest, timings_ms=timings_ms)


def load_run(run_dir: str | Path) -> tuple[dict[str, Any], NetworkSeries]:
    storage = RunStorage(run_dir)
    return storage.manifest(), storage.load_series()


def effective_smoothing(smoothing: int, networks: int) -> int:
    if smoothing > networks:
        logger.warning("smoothing=%d networks=%d using=%d", smoothing, networks, networks)
        return networks
    return smoothing


def collect_rankings(series: NetworkSeries, year: int | None = None) -> list[Ranking]:
    if year is not None:
        return [average_degree_ranking(series, year)]
    return [average_degree_ranking(series), *yearly_rankings(series, top=None)]


def rankings_frame(rankings: Iterable[Ranking]) -> pd.DataFrame:
    rows = [(ranking.period, row.rank, row.currency, row.avg_degree) for ranking in rankings for row in ranking.rows]
    return pd.DataFrame(rows, columns=["period", "rank", "currency", "avg_degree"])


def degree_frame(series: NetworkSeries, currencies: Sequence[str], smoothing: int) -> pd.DataFrame:
    frames = []
    for currency in currencies:
        raw = raw_degree_series(series, currency)
        smoothed = smoothed_degree_series(series, currency, smoothing)
        frame = pd.DataFrame({"date": raw.dates, "currency": raw.currency, "raw": raw.values})
        frame["smoothed"] = frame["date"].map(dict(zip(smoothed.dates, smoothed.values)))
        frames.append(frame.dropna(subset=["raw"]))
    frame = pd.concat(frames, ignore_index=True)
    frame["raw"] = frame["raw"].astype(int)
    return frame


def maxgap_frame(series: NetworkSeries, smoothing: int) -> pd.DataFrame:
    raw = [max_degree_gap(entry.degrees) for entry in series.entries]
    frame = pd.DataFrame(raw, columns=["max", "gap"])
    frame.insert(0, "date", series.dates)
    maxima, gaps = max_degree_gap_series(series, smoothing)
    frame["max_smoothed"] = frame["date"].map(dict(zip(maxima.dates, maxima.values)))
    frame["gap_smoothed"] = frame["date"].map(dict(zip(gaps.dates, gaps.values)))
    return frame


def edges_frame(series: NetworkSeries) -> pd.DataFrame:
    rows = [row for entry in series.entries for row in entry.tree.edge_rows(entry.end_date)]
    return pd.DataFrame(rows, columns=["date", "node_i", "node_j", "weight"])


def correlation_frame(series: NetworkSeries, pairs: Iterable[tuple[str, str]], smoothing: int) -> pd.DataFrame:
    rows = [(c.a, c.b, c.value, c.n, c.degenerate) for c in degree_correlation_table(series, pairs, smoothing)]
    return pd.DataFrame(rows, columns=["a", "b", "correlation", "n", "degenerate"])


def tailfit_document(extremes: GapExtremes) -> dict[str, Any]:
    return {
        "max_gap": {"date": extremes.max_gap_date, "gap": extremes.max_gap, "fit": extremes.max_gap_fit.model_dump()},
        "min_gap": {"date": extremes.min_gap_date, "gap": extremes.min_gap, "fit": extremes.min_gap_fit.model_dump()},
    }


def elapsed_ms(start: float) -> int:
    return int((time.perf_counter() - start) * 1000)
