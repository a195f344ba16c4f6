import itertools

import numpy as np
import pytest
from scipy.stats import rankdata

from fxnet.errors import DegenerateSampleError, InvalidPairError, InvalidParameterError, InvalidSampleError
from fxnet.models import RdcParams, ScaleConvention
from fxnet.services.dependence import (
    MEDIAN_FLOOR,
    canonical_correlation,
    copula_transform,
    draw_projection,
    median_heuristic,
    pearson,
    project,
    random_projection,
    rdc,
    stream_generator,
)


def test_copula_transform_ranks_over_n():
    np.testing.assert_allclose(copula_transform([1.0, 3.0, 2.0]), [1 / 3, 1.0, 2 / 3])


def test_copula_transform_average_ranks_for_ties():
    u = copula_transform([5.0, 5.0, 1.0])
    np.testing.assert_allclose(u, rankdata([5.0, 5.0, 1.0]) / 3)
    np.testing.assert_allclose(u, [2.5 / 3, 2.5 / 3, 1 / 3])


def test_copula_transform_is_invariant_under_increasing_maps():
    x = np.random.default_rng(3).normal(size=200)
    assert np.array_equal(copula_transform(np.exp(x)), copula_transform(x))
    assert np.array_equal(copula_transform(x**3), copula_transform(x))


def test_copula_transform_rejects_non_finite():
    with pytest.raises(InvalidSampleError):
        copula_transform([1.0, np.nan, 2.0])


@pytest.mark.parametrize(("points", "expected"), [([0.0, 1.0], 1.0), ([0.0, 1.0, 2.0], 1.0)])
def test_median_heuristic_small_cases(points, expected):
    assert median_heuristic(points) == expected


def test_median_heuristic_matches_pairwise_enumeration():
    u = np.random.default_rng(7).uniform(size=100)
    squared = [(a - b) ** 2 for a, b in itertools.combinations(u, 2)]
    assert median_heuristic(u) == pytest.approx(float(np.median(squared)), rel=1e-12)


def test_median_heuristic_floor_on_massive_ties():
    assert median_heuristic([0.5, 0.5, 0.5, 0.5, 1.0]) == MEDIAN_FLOOR


def test_median_heuristic_needs_two_points():
    with pytest.raises(InvalidSampleError):
        median_heuristic([0.5])


def test_projection_with_zero_weights_and_offsets():
    features = project(np.linspace(0.1, 1.0, 10), np.zeros(3), np.zeros(3))
    assert features.shape == (6, 10)
    np.testing.assert_array_equal(features[0::2], 1.0)
    np.testing.assert_array_equal(features[1::2], 0.0)


def test_projection_rows_are_bounded_cos_sin_pairs():
    u = copula_transform(np.random.default_rng(1).normal(size=50))
    features = random_projection(u, 10, median_heuristic(u), stream_generator(0, 0, 0, 0))
    assert features.shape == (20, 50)
    assert np.all(np.abs(features) <= 1.0)
    np.testing.assert_allclose(features[0::2] ** 2 + features[1::2] ** 2, 1.0, atol=1e-12)


def test_projection_is_deterministic_per_stream():
    u = np.linspace(0.01, 1.0, 30)
    first = random_projection(u, 4, 0.1, stream_generator(5, 2, 3, 1))
    second = random_projection(u, 4, 0.1, stream_generator(5, 2, 3, 1))
    other = random_projection(u, 4, 0.1, stream_generator(5, 2, 3, 2))
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_projection_rejects_non_positive_scale(s):
    with pytest.raises(InvalidParameterError):
        draw_projection(3, s, stream_generator(0, 0, 0, 0))


def test_scale_conventions_differ_in_weight_spread():
    bandwidth, _ = draw_projection(1000, 0.04, stream_generator(1, 0, 0, 0), ScaleConvention.BANDWIDTH)
    variance, _ = draw_projection(1000, 0.04, stream_generator(1, 0, 0, 0), ScaleConvention.VARIANCE)
    assert np.std(bandwidth) == pytest.approx(5.0, rel=0.1)
    assert np.std(variance) == pytest.approx(0.2, rel=0.1)


def test_canonical_correlation_of_linearly_related_blocks():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 500))
    y = np.vstack([2.0 * x[0] + 1.0, rng.normal(size=500)])
    assert canonical_correlation(x, y).value == pytest.approx(1.0, abs=1e-9)


def test_canonical_correlation_in_unit_interval_and_symmetric():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(4, 200)), rng.normal(size=(5, 200))
    forward = canonical_correlation(x, y, ridge=1e-6).value
    backward = canonical_correlation(y, x, ridge=1e-6).value
    assert 0.0 <= forward <= 1.0
    assert forward == pytest.approx(backward, abs=1e-10)


def test_canonical_correlation_flags_constant_block():
    result = canonical_correlation(np.ones((2, 50)), np.random.default_rng(0).normal(size=(2, 50)))
    assert result.degenerate
    assert result.value == 0.0


def test_canonical_correlation_rejects_mismatched_observations():
    with pytest.raises(InvalidPairError):
        canonical_correlation(np.zeros((2, 10)), np.zeros((2, 11)))


def test_canonical_correlation_of_single_rows_is_absolute_pearson():
    rng = np.random.default_rng(8)
    x = rng.normal(size=200)
    y = -0.4 * x + rng.normal(size=200)
    assert canonical_correlation(x, y).value == pytest.approx(abs(pearson(x, y)), abs=1e-9)


def test_canonical_correlation_of_independent_noise_is_small():
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=(2, 5000)), rng.normal(size=(2, 5000))
    assert canonical_correlation(x, y).value < 0.1


def test_rdc_of_identical_columns_is_near_one():
    x = np.random.default_rng(11).normal(size=300)
    assert rdc(x, x).value >= 0.95


def test_rdc_of_constant_sample_is_flagged_zero():
    result = rdc(np.full(50, 3.0), np.arange(50.0))
    assert result.degenerate
    assert result.value == 0.0


def test_rdc_input_errors():
    with pytest.raises(InvalidPairError):
        rdc(np.arange(10.0), np.arange(11.0))
    with pytest.raises(InvalidSampleError):
        rdc([1.0, np.inf, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(InvalidSampleError):
        rdc([1.0], [2.0])


def test_rdc_reports_median_of_repetitions():
    rng = np.random.default_rng(8)
    x = rng.normal(size=200)
    result = rdc(x, x**2 + rng.normal(size=200), RdcParams(repetitions=7))
    assert len(result.repetitions) == 7
    assert result.value == float(np.median(result.repetitions))


def test_rdc_is_deterministic_per_seed():
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=(2, 300))
    assert rdc(x, y, RdcParams(seed=42)) == rdc(x, y, RdcParams(seed=42))
    assert rdc(x, y, RdcParams(seed=42)).repetitions != rdc(x, y, RdcParams(seed=43)).repetitions


def test_rdc_is_exactly_invariant_under_monotone_maps():
    rng = np.random.default_rng(12)
    x, y = rng.normal(size=(2, 500))
    y = 0.5 * x + y
    params = RdcParams(seed=2024)
    assert rdc(np.exp(x), y**3, params).value == rdc(x, y, params).value


def test_pearson_matches_numpy_and_rejects_constant():
    rng = np.random.default_rng(13)
    x, y = rng.normal(size=(2, 100))
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    assert pearson(x, -x) == pytest.approx(-1.0)
    with pytest.raises(DegenerateSampleError):
        pearson(np.ones(10), np.arange(10.0))


def test_pearson_of_one_swapped_pair():
    assert pearson([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5, abs=1e-12)


class TestRenyiProperties:
    TRIALS = 20
    N = 1000

    @staticmethod
    def trial_rng(trial: int) -> np.random.Generator:
        return np.random.default_rng(1000 + trial)

    def test_range_and_symmetry(self):
        for trial in range(self.TRIALS):
            rng = self.trial_rng(trial)
            x = rng.normal(size=self.N)
            y = 0.5 * x + np.sqrt(0.75) * rng.normal(size=self.N)
            params = RdcParams(seed=trial)
            forward, backward = rdc(x, y, params).value, rdc(y, x, params).value
            assert 0.0 <= forward <= 1.0
            assert abs(forward - backward) <= 0.05

    def test_independent_samples_stay_low(self):
        values = []
        for trial in range(self.TRIALS):
            rng = self.trial_rng(trial)
            values.append(rdc(rng.normal(size=self.N), rng.uniform(size=self.N), RdcParams(seed=trial)).value)
        assert all(0.0 <= value <= 1.0 for value in values)
        assert float(np.median(values)) <= 0.2

    @pytest.mark.parametrize(
        "function",
        [lambda x: x, lambda x: x**3, np.sin],
        ids=["identity", "cube", "sine-half-period"],
    )
    def test_deterministic_dependence_is_high(self, function):
        for trial in range(self.TRIALS):
            x = self.trial_rng(trial).uniform(-np.pi / 2, np.pi / 2, size=self.N)
            assert rdc(x, function(x), RdcParams(seed=trial)).value >= 0.9

    @pytest.mark.parametrize("rho", [0.0, 0.5, 0.9])
    def test_gaussian_dependence_tracks_rho(self, rho):
        for trial in range(self.TRIALS):
            rng = self.trial_rng(trial)
            x = rng.normal(size=self.N)
            y = rho * x + np.sqrt(1 - rho**2) * rng.normal(size=self.N)
            value = rdc(x, y, RdcParams(seed=trial, repetitions=5)).value
            if rho == 0.0:
                # finite-sample null floor; bounded by the independence limit
                assert value <= 0.2
            else:
                assert abs(value - rho) <= 0.1


@pytest.mark.parametrize("seed", range(10))
def test_sinusoid_detected_where_pearson_sees_nothing(seed):
    rng = np.random.default_rng(500 + seed)
    x = rng.uniform(0.125, 1.125, size=1000)
    y = np.sin(4 * np.pi * x) + 0.1 * rng.normal(size=1000)
    assert abs(pearson(x, y)) < 0.15
    assert rdc(x, y, RdcParams(seed=seed)).value > 0.5
