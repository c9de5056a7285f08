import enum
import logging
from dataclasses import dataclass

import numpy as np

from objective.exceptions import ConfigurationError, PlanMismatchError

logger = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    M_OUT_OF_N = "m-out-of-n"
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    POISSON = "poisson"

    @property
    def is_weighted(self):
        return self is not Scheme.M_OUT_OF_N


class PlanKind(str, enum.Enum):
    INDICES = "indices"
    WEIGHTS = "weights"


@dataclass(frozen=True)
class SchemeConfig:
    """재표본 방식 설정.

    Attributes:
        scheme (Scheme): m-out-of-n 인덱스 재표본 또는 승수 가중치 분포.
        m (int | None): 인덱스 재표본 크기. cluster_aware 이면 클러스터 개수. None 이면 n (또는 G).
        cluster_aware (bool): 클러스터 단위 재표본/가중치 여부.
        demean (bool): 실현된 표본 평균을 뺀 승수 (KS 전용).
    """

    scheme: Scheme = Scheme.GAUSSIAN
    m: int | None = None
    cluster_aware: bool = False
    demean: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError as exc:
            raise ConfigurationError(f"Unknown resampling scheme: {self.scheme}") from exc
        if self.demean and not self.scheme.is_weighted:
            raise ConfigurationError("demean requires a multiplier-weight scheme.")
        if self.m is not None:
            if int(self.m) < 1:
                raise ConfigurationError("m must be at least 1.")
            object.__setattr__(self, "m", int(self.m))

    def resolve_m(self, data):
        """실제로 사용할 m 을 데이터에 맞춰 결정합니다."""
        if self.cluster_aware:
            labels, _ = data.cluster_index()
            return self.m or len(labels)
        if self.m is not None and self.m > data.n:
            raise ConfigurationError(f"m = {self.m} exceeds n = {data.n}.")
        return self.m or data.n

    def effective_m(self, data):
        """분산 조정에 들어가는 m. 가중치 계획은 n, 클러스터 인덱스 계획은 행 기준 환산값."""
        if self.scheme.is_weighted:
            return data.n
        m = self.resolve_m(data)
        if self.cluster_aware:
            labels, _ = data.cluster_index()
            return max(1, int(round(m * data.n / len(labels))))
        return m


@dataclass(frozen=True, eq=False)
class ResamplePlan:
    """한 반복에서 실현된 재표본: 인덱스 m 개 또는 가중치 n 개.

    Attributes:
        kind (PlanKind): INDICES 또는 WEIGHTS.
        indices (np.ndarray | None): 재표본된 행 번호.
        weights (np.ndarray | None): 행별 승수 가중치.
        effective_m (int): 분산 조정용 m.
        units (np.ndarray | None): 클러스터 재표본에서 뽑힌 클러스터 코드 (로그용).
    """

    kind: PlanKind
    indices: np.ndarray | None = None
    weights: np.ndarray | None = None
    effective_m: int = 1
    units: np.ndarray | None = None

    def __post_init__(self):
        if (self.indices is None) == (self.weights is None):
            raise ConfigurationError("A plan carries exactly one of indices or weights.")
        if self.indices is not None:
            indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
            if indices.size < 1:
                raise ConfigurationError("An index plan needs at least one index.")
            indices.setflags(write=False)
            object.__setattr__(self, "indices", indices)
            object.__setattr__(self, "kind", PlanKind.INDICES)
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)
            object.__setattr__(self, "kind", PlanKind.WEIGHTS)
        if int(self.effective_m) < 1:
            raise ConfigurationError("effective_m must be at least 1.")

    @property
    def size(self):
        return self.indices.size if self.kind is PlanKind.INDICES else self.weights.size

    def coefficients(self, n):
        """행별 계수와 나눗수 (계수 @ 항 / 나눗수 = 재표본 평균) 를 반환합니다.

        Raises:
            PlanMismatchError: 인덱스가 [0, n) 밖이거나 가중치 길이가 n 이 아닌 경우.
        """
        if self.kind is PlanKind.INDICES:
            if self.indices.min() < 0 or self.indices.max() >= n:
                raise PlanMismatchError(f"Plan index out of range for n = {n}.")
            return np.bincount(self.indices, minlength=n).astype(float), float(self.indices.size)
        if self.weights.size != n:
            raise PlanMismatchError(
                f"Weight plan has length {self.weights.size}, dataset has n = {n}."
            )
        return np.asarray(self.weights, dtype=float), float(n)


def index_plan(indices, effective_m=None, units=None):
    indices = np.asarray(indices, dtype=np.int64)
    return ResamplePlan(
        kind=PlanKind.INDICES,
        indices=indices,
        effective_m=effective_m or indices.size,
        units=units,
    )


def weight_plan(weights, effective_m=None):
    weights = np.asarray(weights, dtype=float)
    return ResamplePlan(kind=PlanKind.WEIGHTS, weights=weights, effective_m=effective_m or weights.size)


def unit_plan(n):
    """모든 가중치가 1인 퇴화 계획 (전체 표본 평가용)."""
    if int(n) < 1:
        raise ConfigurationError("unit_plan needs n >= 1.")
    return weight_plan(np.ones(int(n)), effective_m=int(n))


def _raw_weights(scheme, rng, size):
    if scheme is Scheme.GAUSSIAN:
        return rng.normal(1.0, 1.0, size=size)
    if scheme is Scheme.EXPONENTIAL:
        return rng.exponential(1.0, size=size)
    return rng.poisson(1.0, size=size).astype(float)


def cluster_rows(codes, n_clusters):
    """클러스터 코드별 행 번호 목록을 반환합니다."""
    order = np.argsort(codes, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(codes, minlength=n_clusters))])
    return [order[bounds[g] : bounds[g + 1]] for g in range(n_clusters)]


def draw_plan(config, data, rng):
    """설정과 난수 생성기로 한 반복의 재표본 계획을 생성합니다.

    Args:
        config (SchemeConfig): 재표본 방식.
        data (Dataset): 데이터셋.
        rng (np.random.Generator): RngStream 에서 얻은 해당 반복/용도의 생성기.

    Returns:
        ResamplePlan: 생성된 계획.

    Raises:
        ConfigurationError: cluster_aware 인데 cluster_ids 가 없는 경우.
    """
    n = data.n
    if config.cluster_aware:
        labels, codes = data.cluster_index()
        n_clusters = len(labels)
    else:
        codes, n_clusters = None, n

    if not config.scheme.is_weighted:
        m = config.resolve_m(data)
        if not config.cluster_aware:
            return index_plan(rng.integers(0, n, size=m), effective_m=m)
        drawn = rng.integers(0, n_clusters, size=m)
        members = cluster_rows(codes, n_clusters)
        indices = np.concatenate([members[g] for g in drawn])
        return index_plan(indices, effective_m=config.effective_m(data), units=drawn)

    if config.cluster_aware:
        weights = _raw_weights(config.scheme, rng, n_clusters)[codes]
    else:
        weights = _raw_weights(config.scheme, rng, n)
    if config.demean:
        # 두 번 빼서 반올림 오차까지 제거
        weights = weights - weights.mean()
        weights = weights - weights.mean()
    return weight_plan(weights, effective_m=n)
