"""Rolling-window currency networks and the statistics tracked over their history.

Each network is labelled with the date of the last return row of its window. Windows are
independent work items; results are merged back in end-date order.
"""

import logging
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.integrate import trapezoid
from scipy.stats import gaussian_kde

from fxnet.errors import DegenerateSampleError, InvalidParameterError, UnknownCurrencyError
from fxnet.models import Measure, RankingRow, RdcParams, TailFit
from fxnet.services.dependence import pearson
from fxnet.services.network import (
    SpanningTree,
    degrees,
    dependence_matrix,
    distance_matrix,
    fit_degree_tail,
    intracontinental_fraction,
    mst,
)
from fxnet.services.returns import ReturnsMatrix

logger = logging.getLogger(__name__)

KDE_GRID_POINTS = 512
DEFAULT_CORRELATION_PAIRS = (
    ("CNY", "USD"),
    ("CNY", "EUR"),
    ("USD", "HKD"),
    ("EUR", "HKD"),
    ("USD", "EUR"),
    ("CNY", "HKD"),
)

Period: TypeAlias = int | tuple[str, str] | None


@dataclass(frozen=True)
class NetworkEntry:
    end_date: str
    tree: SpanningTree
    degrees: dict[str, int]
    degenerate_pairs: int = 0

    @property
    def year(self) -> int:
        return int(self.end_date[:4])


@dataclass(frozen=True)
class NetworkSeries:
    entries: tuple[NetworkEntry, ...]
    window_length: int
    measure: Measure

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dates(self) -> tuple[str, ...]:
        return tuple(entry.end_date for entry in self.entries)

    @property
    def currencies(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for entry in self.entries:
            seen.update(dict.fromkeys(entry.tree.labels))
        return tuple(sorted(seen))

    def require(self, currency: str) -> str:
        code = currency.strip().upper()
        if code not in self.currencies:
            raise UnknownCurrencyError(code, self.currencies)
        return code


@dataclass(frozen=True)
class Ranking:
    period: str
    rows: tuple[RankingRow, ...]
    networks: int


@dataclass(frozen=True)
class DegreeSeries:
    currency: str
    dates: tuple[str, ...]
    values: NDArray[np.float64]


@dataclass(frozen=True)
class SeriesCorrelation:
    a: str
    b: str
    value: float
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class IntracontinentalDistribution:
    dates: tuple[str, ...]
    fractions: NDArray[np.float64]
    grid: NDArray[np.float64]
    density: NDArray[np.float64]
    mean: float
    std: float


@dataclass(frozen=True)
class GapExtremes:
    max_gap_date: str
    max_gap: int
    max_gap_fit: TailFit
    min_gap_date: str
    min_gap: int
    min_gap_fit: TailFit


def build_network(returns: ReturnsMatrix, end: int, window: int, measure: Measure, params: RdcParams) -> NetworkEntry | None:
    """MST of the window ending at local row ``end``; currencies with gaps sit the window out."""
    view = returns.window(end, window)
    complete = np.all(np.isfinite(view.returns), axis=0)
    usable = [code for code, ok in zip(view.currencies, complete) if ok]
    end_date = str(view.dates[-1])
    if len(usable) < 2:
        logger.warning("end_date=%s usable_currencies=%d skipped=true", end_date, len(usable))
        return None
    if len(usable) < len(view.currencies):
        view = view.select(usable)

    matrix = dependence_matrix(view, measure, params)
    tree = mst(distance_matrix(matrix))
    return NetworkEntry(end_date=end_date, tree=tree, degrees=degrees(tree), degenerate_pairs=matrix.degenerate_pairs)


def _build_chunk(
    returns: ReturnsMatrix, ends: Sequence[int], window: int, measure: Measure, params: RdcParams
) -> list[NetworkEntry | None]:
    return [build_network(returns, end, window, measure, params) for end in ends]


def _chunks(items: Sequence[int], count: int) -> list[Sequence[int]]:
    size = max(1, -(-len(items) // count))
    return [items[start : start + size] for start in range(0, len(items), size)]


def rolling_networks(
    returns: ReturnsMatrix,
    window: int = 100,
    measure: Measure = Measure.RDC,
    params: RdcParams | None = None,
    jobs: int = 1,
) -> NetworkSeries:
    """One MST per window end index, stride 1. Output does not depend on ``jobs``."""
    params = params or RdcParams()
    if window < 2:
        raise InvalidParameterError(f"window must be >= 2, got {window}")
    if window > len(returns):
        raise InvalidParameterError(f"window {window} longer than the {len(returns)} available return rows")
    if jobs < 1:
        raise InvalidParameterError(f"jobs must be >= 1, got {jobs}")

    ends = range(window - 1, len(returns))
    if jobs == 1 or len(ends) == 1:
        built = _build_chunk(returns, ends, window, measure, params)
    else:
        chunks = _chunks(ends, jobs * 4)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(
                _build_chunk,
                [returns] * len(chunks),
                chunks,
                [window] * len(chunks),
                [measure] * len(chunks),
                [params] * len(chunks),
            )
            built = [entry for part in parts for entry in part]

    entries = tuple(entry for entry in built if entry is not None)
    skipped = len(built) - len(entries)
    logger.info("windows=%d networks=%d skipped=%d measure=%s jobs=%d", len(built), len(entries), skipped, measure, jobs)
    return NetworkSeries(entries=entries, window_length=window, measure=measure)


def _select(series: NetworkSeries, period: Period) -> tuple[str, list[NetworkEntry]]:
    if period is None:
        return "all", list(series.entries)
    if isinstance(period, int):
        return str(period), [entry for entry in series.entries if entry.year == period]
    start, end = period
    return f"{start}..{end}", [entry for entry in series.entries if start <= entry.end_date <= end]


def average_degree_ranking(series: NetworkSeries, period: Period = None) -> Ranking:
    """Mean degree per currency over the selected networks, highest first.

    ``period`` is ``None`` (whole history), a calendar year of the end dates, or an
    inclusive ``(start, end)`` pair of ISO dates. Ties are broken by currency code.
    """
    label, selected = _select(series, period)
    if not selected:
        raise InvalidParameterError(f"no networks in period {label}")

    totals: dict[str, list[int]] = {}
    for entry in selected:
        for code, degree in entry.degrees.items():
            totals.setdefault(code, []).append(degree)
    averages = {code: float(np.mean(values)) for code, values in totals.items()}
    ordered = sorted(averages.items(), key=lambda item: (-item[1], item[0]))
    rows = tuple(RankingRow(rank=rank, currency=code, avg_degree=value) for rank, (code, value) in enumerate(ordered, start=1))
    return Ranking(period=label, rows=rows, networks=len(selected))


def yearly_rankings(series: NetworkSeries, top: int | None = 3) -> list[Ranking]:
    rankings = []
    for year in sorted({entry.year for entry in series.entries}):
        ranking = average_degree_ranking(series, year)
        if top is not None:
            ranking = Ranking(period=ranking.period, rows=ranking.rows[:top], networks=ranking.networks)
        rankings.append(ranking)
    return rankings


def compare_rankings(primary: Ranking, baseline: Ranking) -> list[tuple[int, str, float, int | None]]:
    """Primary ranking rows with each currency's rank in the baseline ranking attached."""
    baseline_rank = {row.currency: row.rank for row in baseline.rows}
    return [(row.rank, row.currency, row.avg_degree, baseline_rank.get(row.currency)) for row in primary.rows]


def _smooth(name: str, dates: Sequence[str], raw: Sequence[float], smoothing: int) -> DegreeSeries:
    if smoothing < 1:
        raise InvalidParameterError(f"smoothing must be >= 1, got {smoothing}")
    if smoothing > len(raw):
        raise InvalidParameterError(f"smoothing {smoothing} exceeds the {len(raw)} networks available")
    values = pd.Series(raw, index=list(dates), dtype=np.float64)
    smoothed = values.rolling(window=smoothing, min_periods=1).mean().iloc[smoothing - 1 :].dropna()
    return DegreeSeries(currency=name, dates=tuple(smoothed.index), values=smoothed.to_numpy())


def raw_degree_series(series: NetworkSeries, currency: str) -> DegreeSeries:
    code = series.require(currency)
    raw = [entry.degrees.get(code, np.nan) for entry in series.entries]
    return DegreeSeries(currency=code, dates=series.dates, values=np.asarray(raw, dtype=np.float64))


def smoothed_degree_series(series: NetworkSeries, currency: str, smoothing: int = 30) -> DegreeSeries:
    """Trailing mean of a currency's degree over ``smoothing`` networks.

    The first value sits at the ``smoothing``-th network. Networks the currency was left
    out of do not count towards the mean.
    """
    raw = raw_degree_series(series, currency)
    return _smooth(raw.currency, raw.dates, raw.values, smoothing)


def max_degree_gap(node_degrees: Mapping[str, int] | Iterable[int]) -> tuple[int, int]:
    """Largest degree and its distance to the runner-up in the sorted degree multiset."""
    values = node_degrees.values() if isinstance(node_degrees, Mapping) else node_degrees
    ordered = sorted(values, reverse=True)
    if len(ordered) < 2:
        raise InvalidParameterError("need at least 2 nodes")
    return ordered[0], ordered[0] - ordered[1]


def max_degree_gap_series(series: NetworkSeries, smoothing: int = 30) -> tuple[DegreeSeries, DegreeSeries]:
    pairs = [max_degree_gap(entry.degrees) for entry in series.entries]
    maxima = [float(top) for top, _ in pairs]
    gaps = [float(gap) for _, gap in pairs]
    return _smooth("max", series.dates, maxima, smoothing), _smooth("gap", series.dates, gaps, smoothing)


def degree_series_correlation(series: NetworkSeries, a: str, b: str, smoothing: int = 30) -> SeriesCorrelation:
    """Pearson correlation of two smoothed degree series over their common dates."""
    first = smoothed_degree_series(series, a, smoothing)
    second = smoothed_degree_series(series, b, smoothing)
    joined = pd.concat(
        [pd.Series(first.values, index=first.dates), pd.Series(second.values, index=second.dates)],
        axis=1,
        join="inner",
    )
    if len(joined) < 2:
        return SeriesCorrelation(first.currency, second.currency, float("nan"), len(joined), degenerate=True)
    try:
        value = pearson(joined.iloc[:, 0].to_numpy(), joined.iloc[:, 1].to_numpy())
    except DegenerateSampleError:
        return SeriesCorrelation(first.currency, second.currency, float("nan"), len(joined), degenerate=True)
    return SeriesCorrelation(first.currency, second.currency, value, len(joined))


def degree_correlation_table(
    series: NetworkSeries,
    pairs: Iterable[tuple[str, str]] = DEFAULT_CORRELATION_PAIRS,
    smoothing: int = 30,
) -> list[SeriesCorrelation]:
    return [degree_series_correlation(series, a, b, smoothing) for a, b in pairs]


def intracontinental_distribution(
    series: NetworkSeries,
    mapping: Mapping[str, str],
    grid_points: int = KDE_GRID_POINTS,
) -> IntracontinentalDistribution:
    """Per-network intracontinental link share and its Gaussian KDE on [0, 1].

    The bandwidth follows Silverman's rule and the density is renormalised over the grid.
    Samples without spread get a unit-mass spike at the nearest grid point.
    """
    if not series.entries:
        raise InvalidParameterError("no networks")
    fractions = np.array([intracontinental_fraction(entry.tree, mapping) for entry in series.entries])
    grid = np.linspace(0.0, 1.0, grid_points)

    if fractions.size < 2 or np.ptp(fractions) == 0:
        density = np.zeros_like(grid)
        density[int(np.argmin(np.abs(grid - fractions[0])))] = 1.0
    else:
        density = gaussian_kde(fractions, bw_method="silverman")(grid)
    density = density / trapezoid(density, grid)

    std = float(np.std(fractions, ddof=1)) if fractions.size > 1 else 0.0
    return IntracontinentalDistribution(
        dates=series.dates,
        fractions=fractions,
        grid=grid,
        density=density,
        mean=float(np.mean(fractions)),
        std=std,
    )


def gap_extremes_tail_fits(series: NetworkSeries) -> GapExtremes:
    """Degree-tail fits of the networks with the largest and the smallest max-degree gap."""
    if not series.entries:
        raise InvalidParameterError("no networks")
    gaps = np.array([max_degree_gap(entry.degrees)[1] for entry in series.entries])
    widest = series.entries[int(np.argmax(gaps))]
    narrowest = series.entries[int(np.argmin(gaps))]
    return GapExtremes(
        max_gap_date=widest.end_date,
        max_gap=int(gaps.max()),
        max_gap_fit=fit_degree_tail(list(widest.degrees.values())),
        min_gap_date=narrowest.end_date,
        min_gap=int(gaps.min()),
        min_gap_fit=fit_degree_tail(list(narrowest.degrees.values())),
    )
