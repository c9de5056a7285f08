from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class ModelSpec:
    """관측치 하나에 대한 손실 q(z_i; θ) 와 그 도함수를 묶은 모델 정의.

    행 단위 콜백(loss, gradient, hessian)은 순수 함수여야 합니다. batch_* 콜백은
    같은 값을 여러 행에 대해 한 번에 계산하는 선택적 벡터화 버전으로,
    있으면 evaluate 가 우선 사용합니다.

    Attributes:
        name (str): 모델 이름.
        loss: (row, θ) -> float
        gradient: (row, θ) -> (d,) 또는 None (None 이면 손실의 중앙차분)
        hessian: (row, θ) -> (d, d) 또는 None (None 이면 기울기의 중앙차분)
        batch_loss: (rows, θ) -> (k,)
        batch_gradient: (rows, θ) -> (k, d)
        batch_hessian: (rows, θ) -> (k, d, d)
        dim (int | None): d_θ. None 이면 데이터 폭 - 1 로 결정.
        param_names (tuple): 계수 이름.
        fixed_effects (tuple): 고정효과 좌표 인덱스 (MALA 사전분포용).
        penalty: 목적함수에 더해지는 이차 벌점 (estimators.penalty.Penalty).
        data_transform: 패널 within 변환처럼 추정 전에 데이터에 적용할 함수.
    """

    name: str
    loss: Callable
    gradient: Callable | None = None
    hessian: Callable | None = None
    batch_loss: Callable | None = None
    batch_gradient: Callable | None = None
    batch_hessian: Callable | None = None
    dim: int | None = None
    param_names: tuple = ()
    fixed_effects: tuple = ()
    penalty: object | None = None
    data_transform: Callable | None = None

    @property
    def analytic_flags(self):
        return {
            "gradient": self.gradient is not None or self.batch_gradient is not None,
            "hessian": self.hessian is not None or self.batch_hessian is not None,
        }

    def resolve_dim(self, data):
        if self.dim is not None:
            return self.dim
        return data.width - 1

    def names(self, data):
        dim = self.resolve_dim(data)
        if len(self.param_names) == dim:
            return tuple(self.param_names)
        if data.width - 1 == dim:
            return tuple(data.regressor_names)
        return tuple(f"theta_{j + 1}" for j in range(dim))

    def prepare(self, data):
        """data_transform 이 있으면 적용한 데이터셋을 반환합니다."""
        if self.data_transform is None:
            return data
        return self.data_transform(data)

    def with_penalty(self, penalty):
        return replace(self, penalty=penalty)


def as_parameter(theta, dim=None):
    """θ 를 유한한 1차원 float 배열(ParameterVector)로 검증해 반환합니다."""
    values = np.array(theta, dtype=float).reshape(-1)
    if values.size < 1:
        raise ConfigurationError("Parameter vector must have d >= 1.")
    if dim is not None and values.size != dim:
        raise ConfigurationError(f"Parameter vector has length {values.size}, expected {dim}.")
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("Parameter vector must be finite.")
    return values
