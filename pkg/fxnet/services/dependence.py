"""Randomized Dependence Coefficient and the Pearson baseline.

The RDC of two samples is the largest canonical correlation between random sine/cosine
projections of their empirical copula transforms. Every random draw comes from a Philox
stream addressed by ``(seed, window, pair, repetition)``, so a value never depends on
evaluation order or on how the work is split across processes.
"""

from dataclasses import dataclass
from typing import TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg
from scipy.spatial.distance import pdist
from scipy.stats import rankdata

from fxnet.errors import DegenerateSampleError, InvalidPairError, InvalidParameterError, InvalidSampleError
from fxnet.models import RdcParams, ScaleConvention


MEDIAN_FLOOR = 1e-6

FeatureMatrix: TypeAlias = NDArray[np.float64]


@dataclass(frozen=True)
class CanonicalCorrelation:
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class RdcResult:
    value: float
    repetitions: tuple[float, ...]
    degenerate: bool = False

    def __float__(self) -> float:
        return self.value


def as_sample(values: ArrayLike, name: str = "sample") -> NDArray[np.float64]:
    sample = np.asarray(values, dtype=np.float64)
    if sample.ndim != 1:
        raise InvalidSampleError(f"{name} must be one-dimensional, got shape {sample.shape}")
    if sample.size < 2:
        raise InvalidSampleError(f"{name} needs at least 2 values, got {sample.size}")
    if not np.all(np.isfinite(sample)):
        raise InvalidSampleError(f"{name} contains non-finite values")
    return sample


def copula_transform(x: ArrayLike) -> NDArray[np.float64]:
    """Empirical copula: average ranks divided by n, values in (0, 1]."""
    sample = as_sample(x)
    return rankdata(sample, method="average") / sample.size


def median_heuristic(u: ArrayLike) -> float:
    """Median of all pairwise squared distances, floored at ``MEDIAN_FLOOR``."""
    points = as_sample(u, "copula sample")
    median = float(np.median(pdist(points[:, np.newaxis], metric="sqeuclidean")))
    if median <= 0.0:
        return MEDIAN_FLOOR
    return median


def stream_generator(seed: int, window: int, pair: int, repetition: int) -> np.random.Generator:
    # counter word 0 is consumed by the draws themselves; the address lives in words 1..3
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, window, pair, repetition]))


def draw_projection(
    k: int,
    s: float,
    rng: np.random.Generator,
    scale: ScaleConvention = ScaleConvention.BANDWIDTH,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if not np.isfinite(s) or s <= 0:
        raise InvalidParameterError(f"projection scale s must be > 0, got {s}")
    std = 1.0 / np.sqrt(s) if scale is ScaleConvention.BANDWIDTH else np.sqrt(s)
    weights = rng.normal(0.0, std, size=k)
    offsets = rng.uniform(-np.pi, np.pi, size=k)
    return weights, offsets


def project(u: ArrayLike, weights: ArrayLike, offsets: ArrayLike) -> FeatureMatrix:
    """Rows 2i and 2i+1 are cos and sin of ``weights[i] * u + offsets[i]``."""
    points = np.asarray(u, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    b = np.asarray(offsets, dtype=np.float64)
    arguments = np.outer(w, points) + b[:, np.newaxis]
    features = np.empty((2 * w.size, points.size))
    features[0::2] = np.cos(arguments)
    features[1::2] = np.sin(arguments)
    return features


def random_projection(
    u: ArrayLike,
    k: int,
    s: float,
    rng: np.random.Generator,
    scale: ScaleConvention = ScaleConvention.BANDWIDTH,
) -> FeatureMatrix:
    weights, offsets = draw_projection(k, s, rng, scale)
    return project(u, weights, offsets)


def canonical_correlation(x: ArrayLike, y: ArrayLike, ridge: float = 0.0) -> CanonicalCorrelation:
    """Largest canonical correlation between the rows of ``x`` (p x n) and ``y`` (q x n)."""
    xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
    ym = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if xm.shape[1] != ym.shape[1]:
        raise InvalidPairError(f"observation counts differ: {xm.shape[1]} vs {ym.shape[1]}")
    n = xm.shape[1]
    if n < 2:
        raise InvalidSampleError(f"need at least 2 observations, got {n}")
    if ridge < 0:
        raise InvalidParameterError(f"ridge must be >= 0, got {ridge}")

    p = xm.shape[0]
    joint = np.vstack([xm, ym])
    joint = joint - joint.mean(axis=1, keepdims=True)
    cov = joint @ joint.T / (n - 1)
    cxx, cyy, cxy = cov[:p, :p], cov[p:, p:], cov[:p, p:]

    variance_floor = (np.finfo(np.float64).eps * max(1.0, float(np.abs(joint).max()))) ** 2
    if np.diag(cxx).max() <= variance_floor or np.diag(cyy).max() <= variance_floor:
        return CanonicalCorrelation(0.0, degenerate=True)

    cross = _whitened_cross(cxx, cyy, cxy, ridge)
    if cross is None or cross.size == 0:
        return CanonicalCorrelation(0.0, degenerate=True)
    value = float(linalg.svdvals(cross)[0])
    return CanonicalCorrelation(min(max(value, 0.0), 1.0))


def _whitened_cross(
    cxx: NDArray[np.float64],
    cyy: NDArray[np.float64],
    cxy: NDArray[np.float64],
    ridge: float,
) -> NDArray[np.float64] | None:
    if ridge > 0:
        try:
            lx = linalg.cholesky(cxx + ridge * np.eye(cxx.shape[0]), lower=True)
            ly = linalg.cholesky(cyy + ridge * np.eye(cyy.shape[0]), lower=True)
        except linalg.LinAlgError:
            pass
        else:
            left = linalg.solve_triangular(lx, cxy, lower=True)
            return linalg.solve_triangular(ly, left.T, lower=True).T

    wx = _inverse_sqrt(cxx, ridge)
    wy = _inverse_sqrt(cyy, ridge)
    if wx is None or wy is None:
        return None
    return wx.T @ cxy @ wy


def _inverse_sqrt(cov: NDArray[np.float64], ridge: float) -> NDArray[np.float64] | None:
    values, vectors = linalg.eigh(cov + ridge * np.eye(cov.shape[0]))
    top = values.max()
    if top <= 0:
        return None
    keep = values > top * cov.shape[0] * np.finfo(np.float64).eps
    return vectors[:, keep] / np.sqrt(values[keep])


def rdc(x: ArrayLike, y: ArrayLike, params: RdcParams | None = None) -> RdcResult:
    """Median RDC over ``params.repetitions`` independent projection draws."""
    params = params or RdcParams()
    xs = as_sample(x, "x")
    ys = as_sample(y, "y")
    if xs.size != ys.size:
        raise InvalidPairError(f"samples differ in length: {xs.size} vs {ys.size}")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        return RdcResult(0.0, (), degenerate=True)

    ux, uy = copula_transform(xs), copula_transform(ys)
    sx = params.s or median_heuristic(ux)
    sy = params.s or median_heuristic(uy)
    return rdc_from_copula(ux, sx, uy, sy, params)


def rdc_from_copula(
    ux: NDArray[np.float64],
    sx: float,
    uy: NDArray[np.float64],
    sy: float,
    params: RdcParams,
    *,
    window: int = 0,
    pair: int = 0,
) -> RdcResult:
    """RDC on precomputed copula transforms and scales, drawing from stream ``(window, pair)``.

    The lexicographically smaller copula sample takes the first projection draw, so the
    result is exactly symmetric in its two arguments.
    """
    if _precedes(uy, ux):
        ux, sx, uy, sy = uy, sy, ux, sx
    values: list[float] = []
    degenerate = False
    for repetition in range(params.repetitions):
        rng = stream_generator(params.seed, window, pair, repetition)
        fx = random_projection(ux, params.k, sx, rng, params.scale)
        fy = random_projection(uy, params.k, sy, rng, params.scale)
        result = canonical_correlation(fx, fy, params.ridge)
        degenerate = degenerate or result.degenerate
        values.append(result.value)
    return RdcResult(float(np.median(values)), tuple(values), degenerate)


def _precedes(a: NDArray[np.float64], b: NDArray[np.float64]) -> bool:
    differ = np.flatnonzero(a != b)
    return differ.size > 0 and bool(a[differ[0]] < b[differ[0]])


def pearson(x: ArrayLike, y: ArrayLike) -> float:
    xs = as_sample(x, "x")
    ys = as_sample(y, "y")
    if xs.size != ys.size:
        raise InvalidPairError(f"samples differ in length: {xs.size} vs {ys.size}")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise DegenerateSampleError("Pearson correlation is undefined for a constant sample")
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    value = float(xc @ yc / np.sqrt((xc @ xc) * (yc @ yc)))
    return min(max(value, -1.0), 1.0)
