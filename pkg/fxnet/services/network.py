import itertools
import math
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy import optimize, stats
from scipy.special import zeta

from fxnet.errors import ConfigurationError, DegenerateSampleError, InvalidParameterError, InvalidSampleError
from fxnet.models import Measure, RdcParams, TailFit
from fxnet.services.dependence import copula_transform, median_heuristic, pearson, rdc_from_copula
from fxnet.services.returns import ReturnsMatrix

MAX_DISTANCE = {Measure.RDC: math.sqrt(2.0), Measure.PEARSON: 2.0}


@dataclass(frozen=True)
class DependenceMatrix:
    labels: tuple[str, ...]
    values: NDArray[np.float64]
    measure: Measure
    degenerate: NDArray[np.bool_]

    @property
    def degenerate_pairs(self) -> int:
        return int(np.triu(self.degenerate, 1).sum())


@dataclass(frozen=True)
class DistanceMatrix:
    labels: tuple[str, ...]
    values: NDArray[np.float64]


class Edge(NamedTuple):
    i: int
    j: int
    weight: float


@dataclass(frozen=True)
class SpanningTree:
    labels: tuple[str, ...]
    edges: tuple[Edge, ...]

    @property
    def total_weight(self) -> float:
        return math.fsum(edge.weight for edge in self.edges)

    def links(self) -> list[tuple[str, str]]:
        return [(self.labels[edge.i], self.labels[edge.j]) for edge in self.edges]

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": list(self.labels),
            "edges": [
                {"source": self.labels[edge.i], "target": self.labels[edge.j], "weight": edge.weight}
                for edge in self.edges
            ],
            "degrees": degrees(self),
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "SpanningTree":
        labels = tuple(document["labels"])
        index = {label: position for position, label in enumerate(labels)}
        edges = []
        for item in document["edges"]:
            i, j = sorted((index[item["source"]], index[item["target"]]))
            edges.append(Edge(i, j, float(item["weight"])))
        return cls(labels=labels, edges=tuple(edges))

    def edge_rows(self, date: str) -> list[tuple[str, str, str, float]]:
        return [(date, self.labels[edge.i], self.labels[edge.j], edge.weight) for edge in self.edges]


class UnionFind:
    """Union-find over 0..n-1; equal ranks keep the smaller root."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb] or (self.rank[ra] == self.rank[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def dependence_matrix(
    window: ReturnsMatrix,
    measure: Measure = Measure.RDC,
    params: RdcParams | None = None,
) -> DependenceMatrix:
    """Pairwise dependence of the window's columns; diagonal 1, exactly symmetric.

    Pairs are visited in label order, and the RDC stream of a pair is addressed by the
    window end index and that pair's rank, so results do not depend on column order.
    """
    params = params or RdcParams()
    data = window.returns
    n_rows, n_cols = data.shape
    if n_rows < 2 or n_cols < 2:
        raise InvalidParameterError(f"window needs >= 2 rows and >= 2 currencies, got {n_rows} x {n_cols}")
    if not np.all(np.isfinite(data)):
        raise InvalidSampleError("window contains missing returns")

    values = np.eye(n_cols)
    degenerate = np.zeros((n_cols, n_cols), dtype=bool)
    order = sorted(range(n_cols), key=lambda column: window.currencies[column])
    pairs = [(order[a], order[b]) for a, b in itertools.combinations(range(n_cols), 2)]

    if measure is Measure.PEARSON:
        for f, e in pairs:
            try:
                value = pearson(data[:, f], data[:, e])
            except DegenerateSampleError as exc:
                constant = [window.currencies[c] for c in (f, e) if np.ptp(data[:, c]) == 0]
                raise DegenerateSampleError(
                    f"constant returns for {', '.join(constant)} in window ending {window.dates[-1]}"
                ) from exc
            values[f, e] = values[e, f] = value
    else:
        constant = np.ptp(data, axis=0) == 0
        copulas = [None if constant[c] else copula_transform(data[:, c]) for c in range(n_cols)]
        scales = [None if u is None else (params.s or median_heuristic(u)) for u in copulas]
        for pair_index, (f, e) in enumerate(pairs):
            if constant[f] or constant[e]:
                degenerate[f, e] = degenerate[e, f] = True
                continue
            result = rdc_from_copula(
                copulas[f], scales[f], copulas[e], scales[e], params,
                window=window.end_index, pair=pair_index,
            )
            values[f, e] = values[e, f] = result.value
            if result.degenerate:
                degenerate[f, e] = degenerate[e, f] = True

    return DependenceMatrix(labels=window.currencies, values=values, measure=measure, degenerate=degenerate)


def distance_matrix(matrix: DependenceMatrix) -> DistanceMatrix:
    """D = sqrt(2 (1 - C)); flagged cells sit at the measure's maximal distance."""
    values = np.sqrt(np.clip(2.0 * (1.0 - matrix.values), 0.0, None))
    values[matrix.degenerate] = MAX_DISTANCE[matrix.measure]
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(labels=matrix.labels, values=values)


def mst(distances: DistanceMatrix) -> SpanningTree:
    """Kruskal over ascending distance; ties go to the lexicographically smaller label pair."""
    labels = distances.labels
    n = len(labels)
    if n < 2:
        raise InvalidParameterError(f"need at least 2 nodes, got {n}")
    values = np.asarray(distances.values, dtype=np.float64)
    if values.shape != (n, n) or not np.all(np.isfinite(values)):
        raise InvalidParameterError("distance matrix must be square and finite")

    candidates = []
    for i, j in itertools.combinations(range(n), 2):
        first, second = sorted((labels[i], labels[j]))
        candidates.append((float(values[i, j]), first, second, i, j))
    candidates.sort()

    forest = UnionFind(n)
    edges: list[Edge] = []
    for weight, _, _, i, j in candidates:
        if forest.union(i, j):
            edges.append(Edge(i, j, weight))
            if len(edges) == n - 1:
                break
    return SpanningTree(labels=tuple(labels), edges=tuple(edges))


def degrees(tree: SpanningTree) -> dict[str, int]:
    counts = dict.fromkeys(tree.labels, 0)
    for a, b in tree.links():
        counts[a] += 1
        counts[b] += 1
    return counts


def load_continents(path: str | Path) -> dict[str, str]:
    """Read ``CCY,Continent`` lines into a mapping."""
    mapping_path = Path(path)
    if not mapping_path.is_file():
        raise ConfigurationError(f"continent mapping not found: {mapping_path}")
    frame = pd.read_csv(
        mapping_path,
        header=None,
        names=["currency", "continent"],
        dtype=str,
        comment="#",
        skipinitialspace=True,
        skip_blank_lines=True,
    )
    if frame.isna().any().any():
        raise ConfigurationError(f"malformed continent mapping line in {mapping_path}")
    currencies = frame["currency"].str.strip().str.upper()
    duplicated = currencies[currencies.duplicated()]
    if not duplicated.empty:
        raise ConfigurationError(f"currency listed twice in continent mapping: {duplicated.iloc[0]}")
    return dict(zip(currencies, frame["continent"].str.strip()))


def _check_mapped(labels: Iterable[str], mapping: Mapping[str, str]) -> None:
    missing = sorted({label for label in labels if label not in mapping})
    if missing:
        raise ConfigurationError(f"currencies missing from continent mapping: {', '.join(missing)}")


def intracontinental_fraction(
    links: SpanningTree | Iterable[tuple[str, str]],
    mapping: Mapping[str, str],
) -> float:
    """Share of links joining two currencies on the same continent."""
    pairs = links.links() if isinstance(links, SpanningTree) else list(links)
    if not pairs:
        raise InvalidParameterError("no links to classify")
    _check_mapped(itertools.chain.from_iterable(pairs), mapping)
    same = sum(1 for a, b in pairs if mapping[a] == mapping[b])
    return same / len(pairs)


def full_graph_intracontinental_fraction(labels: Sequence[str], mapping: Mapping[str, str]) -> float:
    """Same share over the complete graph, sum C(n_i, 2) / C(N, 2)."""
    if len(labels) < 2:
        raise InvalidParameterError("need at least 2 currencies")
    _check_mapped(labels, mapping)
    sizes = Counter(mapping[label] for label in labels)
    return sum(math.comb(size, 2) for size in sizes.values()) / math.comb(len(labels), 2)


def degree_histogram(values: Iterable[int]) -> dict[int, int]:
    return dict(sorted(Counter(int(v) for v in values).items()))


def _as_degrees(values: Sequence[int] | Mapping[int, int] | NDArray[np.integer]) -> NDArray[np.int64]:
    if isinstance(values, Mapping):
        data = np.repeat(np.fromiter(values.keys(), dtype=np.int64), np.fromiter(values.values(), dtype=np.int64))
    else:
        data = np.asarray(values, dtype=np.int64)
    return np.sort(data[data >= 1])


def _powerlaw_alpha(tail: NDArray[np.int64], xmin: int) -> float:
    log_sum = float(np.log(tail).sum())
    size = tail.size

    def negative_log_likelihood(alpha: float) -> float:
        return alpha * log_sum + size * math.log(zeta(alpha, xmin))

    result = optimize.minimize_scalar(negative_log_likelihood, bounds=(1.0001, 20.0), method="bounded")
    return float(result.x)


def _powerlaw_ks(tail: NDArray[np.int64], alpha: float, xmin: int) -> float:
    support, counts = np.unique(tail, return_counts=True)
    empirical = np.cumsum(counts) / tail.size
    model = 1.0 - zeta(alpha, support + 1.0) / zeta(alpha, xmin)
    return float(np.abs(empirical - model).max())


def _lognormal_fit(tail: NDArray[np.int64], lower: float) -> tuple[float, float]:
    logs = np.log(tail)
    start = np.array([logs.mean(), math.log(max(logs.std(), 1e-3))])

    def negative_log_likelihood(theta: NDArray[np.float64]) -> float:
        mu, sigma = theta[0], math.exp(theta[1])
        dist = stats.lognorm(s=sigma, scale=math.exp(mu))
        survival = dist.sf(lower)
        if survival <= 0:
            return np.inf
        return float(-dist.logpdf(tail).sum() + tail.size * math.log(survival))

    result = optimize.minimize(negative_log_likelihood, start, method="Nelder-Mead")
    mu, log_sigma = (result.x if np.all(np.isfinite(result.x)) and np.isfinite(result.fun) else start)
    return float(mu), float(math.exp(log_sigma))


def _lognormal_ks(tail: NDArray[np.int64], mu: float, sigma: float, lower: float) -> float:
    support, counts = np.unique(tail, return_counts=True)
    empirical = np.cumsum(counts) / tail.size
    dist = stats.lognorm(s=sigma, scale=math.exp(mu))
    model = (dist.cdf(support + 0.5) - dist.cdf(lower)) / dist.sf(lower)
    return float(np.abs(empirical - model).max())


def fit_degree_tail(values: Sequence[int] | Mapping[int, int] | NDArray[np.integer]) -> TailFit:
    """Discrete power law (MLE, xmin by minimal KS) and a log-normal on the same tail.

    Accepts a degree sequence or a ``{degree: count}`` histogram. A sample with a single
    distinct degree has no tail to fit and comes back with ``available=False``.
    """
    data = _as_degrees(values)
    distinct = np.unique(data)
    if distinct.size < 2:
        return TailFit(available=False, n_tail=int(data.size))

    best: tuple[float, int, float] | None = None
    for xmin in distinct[:-1]:
        tail = data[data >= xmin]
        alpha = _powerlaw_alpha(tail, int(xmin))
        ks = _powerlaw_ks(tail, alpha, int(xmin))
        if best is None or ks < best[0]:
            best = (ks, int(xmin), alpha)

    ks_pl, xmin, alpha = best
    tail = data[data >= xmin]
    # continuity correction: integer degrees are treated as bins of width 1
    lower = xmin - 0.5
    mu, sigma = _lognormal_fit(tail, lower)
    return TailFit(
        available=True,
        alpha=alpha,
        xmin=xmin,
        mu=mu,
        sigma=sigma,
        ks_pl=ks_pl,
        ks_ln=_lognormal_ks(tail, mu, sigma, lower),
        n_tail=int(tail.size),
    )
