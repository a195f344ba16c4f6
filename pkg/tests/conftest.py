from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fxnet.config import DEFAULT_CONTINENTS_PATH, Settings
from fxnet.services.evolution import NetworkEntry, NetworkSeries
from fxnet.models import Measure
from fxnet.services.network import Edge, SpanningTree, degrees

CURRENCIES_27 = (
    "EUR", "GBP", "CHF", "DKK", "NOK", "SEK", "RUB", "TRY",
    "CNY", "HKD", "INR", "MYR", "PHP", "PKR", "THB", "TWD", "ILS",
    "USD", "CAD", "MXN", "BRL", "ARS", "CLP",
    "AUD", "NZD", "FJD", "ZAR",
)


def random_walk_rates(rows: int, currencies: tuple[str, ...], seed: int = 1, start: str = "2005-01-03") -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    steps = rng.normal(0.0, 0.01, size=(rows, len(currencies)))
    rates = np.exp(np.cumsum(steps, axis=0))
    frame = pd.DataFrame(rates, columns=list(currencies))
    frame.insert(0, "date", pd.bdate_range(start, periods=rows).strftime("%Y-%m-%d"))
    return frame


def write_rates(path: Path, frame: pd.DataFrame) -> Path:
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def tree_from_links(labels: tuple[str, ...], links: list[tuple[str, str]]) -> SpanningTree:
    index = {label: i for i, label in enumerate(labels)}
    edges = tuple(Edge(*sorted((index[a], index[b])), 1.0) for a, b in links)
    return SpanningTree(labels=labels, edges=edges)


def series_from_trees(trees: list[SpanningTree], start: str = "2010-01-01") -> NetworkSeries:
    dates = pd.date_range(start, periods=len(trees), freq="D").strftime("%Y-%m-%d")
    entries = tuple(NetworkEntry(end_date=date, tree=tree, degrees=degrees(tree)) for date, tree in zip(dates, trees))
    return NetworkSeries(entries=entries, window_length=100, measure=Measure.PEARSON)


def star(labels: tuple[str, ...]) -> SpanningTree:
    return tree_from_links(labels, [(labels[0], other) for other in labels[1:]])


def path_tree(labels: tuple[str, ...]) -> SpanningTree:
    return tree_from_links(labels, list(zip(labels[:-1], labels[1:])))


@pytest.fixture
def settings(tmp_path: Path) -> Settings:
    return Settings(
        FXNET_JOBS_DIR=str(tmp_path / "jobs"),
        FXNET_WORKERS=1,
        FXNET_CONTINENTS=str(DEFAULT_CONTINENTS_PATH),
    )


@pytest.fixture
def toy_rates(tmp_path: Path) -> Path:
    """Five currencies, 120 rate rows in XAG."""
    return write_rates(tmp_path / "rates.csv", random_walk_rates(120, ("USD", "EUR", "CNY", "HKD", "GBP")))
