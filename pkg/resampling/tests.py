import numpy as np
import pytest
from numpy.testing import assert_allclose

from objective.datasets import Dataset
from objective.exceptions import ConfigurationError
from .plans import PlanKind, Scheme, SchemeConfig, draw_plan, index_plan, unit_plan
from .streams import Purpose, RngStream


@pytest.fixture
def data():
    rows = np.column_stack([np.arange(30.0), np.ones(30)])
    return Dataset(rows=rows, cluster_ids=np.repeat(np.arange(6), 5))


def _plan(config, data, seed=1, b=0):
    return draw_plan(config, data, RngStream(seed).generator(b, Purpose.PLAN))


def test_same_key_gives_same_plan(data):
    """같은 (seed, 반복) 의 계획 재현 테스트"""
    config = SchemeConfig(Scheme.M_OUT_OF_N, m=10)

    first = _plan(config, data, seed=42, b=7)
    second = _plan(config, data, seed=42, b=7)
    other = _plan(config, data, seed=42, b=8)

    assert np.array_equal(first.indices, second.indices)
    assert not np.array_equal(first.indices, other.indices)


def test_streams_separate_purposes_and_paths():
    """용도와 경로별 하위 스트림 분리 테스트"""
    stream = RngStream(5)

    plan_draw = stream.generator(0, Purpose.PLAN).standard_normal(4)
    direction_draw = stream.generator(0, Purpose.DIRECTION).standard_normal(4)
    child_draw = stream.child(1).generator(0, Purpose.PLAN).standard_normal(4)

    assert not np.allclose(plan_draw, direction_draw)
    assert not np.allclose(plan_draw, child_draw)
    assert_allclose(plan_draw, RngStream(5).generator(0, Purpose.PLAN).standard_normal(4))


def test_seed_range():
    """64-bit 시드 범위 검증 테스트"""
    RngStream(2**64 - 1)
    with pytest.raises(ConfigurationError):
        RngStream(-1)
    with pytest.raises(ConfigurationError):
        RngStream(2**64)


def test_index_plan_bounds(data):
    """m-out-of-n 인덱스 범위와 크기 테스트"""
    plan = _plan(SchemeConfig(Scheme.M_OUT_OF_N, m=12), data)

    assert plan.kind is PlanKind.INDICES
    assert plan.size == 12
    assert plan.effective_m == 12
    assert plan.indices.min() >= 0
    assert plan.indices.max() < data.n


def test_m_larger_than_n_is_rejected(data):
    """m > n 거부 테스트"""
    with pytest.raises(ConfigurationError):
        _plan(SchemeConfig(Scheme.M_OUT_OF_N, m=31), data)


def test_gaussian_weight_moments():
    """가우스 승수 평균/분산 테스트"""
    big = Dataset(rows=np.zeros((100000, 2)))
    plan = _plan(SchemeConfig(Scheme.GAUSSIAN), big)

    assert plan.kind is PlanKind.WEIGHTS
    assert plan.effective_m == 100000
    assert plan.weights.mean() == pytest.approx(1.0, abs=0.02)
    assert plan.weights.var() == pytest.approx(1.0, abs=0.02)


def test_exponential_and_poisson_weights(data):
    """지수/포아송 승수 테스트"""
    exponential = _plan(SchemeConfig(Scheme.EXPONENTIAL), data)
    poisson = _plan(SchemeConfig(Scheme.POISSON), data)

    assert np.all(exponential.weights > 0)
    assert np.all(poisson.weights >= 0)
    assert np.array_equal(poisson.weights, np.round(poisson.weights))


def test_demeaned_weights_sum_to_zero(data):
    """평균을 뺀 승수의 합 테스트"""
    plan = _plan(SchemeConfig(Scheme.GAUSSIAN, demean=True), data)

    assert abs(plan.weights.sum()) < 1e-10


def test_demean_requires_weights():
    """인덱스 방식의 demean 거부 테스트"""
    with pytest.raises(ConfigurationError):
        SchemeConfig(Scheme.M_OUT_OF_N, demean=True)


def test_cluster_weights_are_shared_within_cluster(data):
    """클러스터 내 동일 가중치 테스트"""
    plan = _plan(SchemeConfig(Scheme.EXPONENTIAL, cluster_aware=True), data)

    per_cluster = plan.weights.reshape(6, 5)
    assert np.all(per_cluster == per_cluster[:, :1])


def test_cluster_index_plan_takes_whole_clusters(data):
    """클러스터 인덱스 재표본 테스트"""
    config = SchemeConfig(Scheme.M_OUT_OF_N, m=4, cluster_aware=True)
    plan = _plan(config, data)

    assert plan.units.size == 4
    assert plan.size == 20
    assert plan.effective_m == 20
    assert config.effective_m(data) == round(4 * 30 / 6)
    drawn = data.cluster_ids[plan.indices].reshape(4, 5)
    assert np.all(drawn == plan.units[:, None])


def test_cluster_plan_needs_cluster_ids():
    """cluster_ids 없는 클러스터 재표본 거부 테스트"""
    bare = Dataset(rows=np.zeros((10, 2)))
    with pytest.raises(ConfigurationError):
        _plan(SchemeConfig(Scheme.GAUSSIAN, cluster_aware=True), bare)


def test_unit_plan():
    """단위 가중치 계획 테스트"""
    plan = unit_plan(5)
    coef, divisor = plan.coefficients(5)

    assert_allclose(coef, np.ones(5))
    assert divisor == 5.0
    with pytest.raises(ConfigurationError):
        unit_plan(0)


def test_index_plan_coefficients():
    """인덱스 계획 계수 테스트"""
    coef, divisor = index_plan([0, 2, 2]).coefficients(4)

    assert_allclose(coef, [1.0, 0.0, 2.0, 0.0])
    assert divisor == 3.0


def test_unknown_scheme():
    """알 수 없는 재표본 방식 거부 테스트"""
    with pytest.raises(ConfigurationError):
        SchemeConfig("jackknife")
