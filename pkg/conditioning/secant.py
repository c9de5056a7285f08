import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from objective.exceptions import ConditioningFailureError, ConfigurationError
from resampling.streams import Purpose
from .matrices import sym_inv_sqrt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QnParams:
    """최소제곱 secant 준뉴턴 갱신의 조정값.

    Attributes:
        L (int): secant 쌍 개수 (L >= d).
        lambda_S (float): λ_min(SᵀS/L) 하한.
        lambda_min (float): 곡률 하한 λ̲. P_b 의 최대 고윳값은 1/λ̲ 이하.
        max_refresh (int | None): 한 단계에서 허용하는 임의 방향 교체 횟수. None 이면 L.
    """

    L: int
    lambda_S: float = 1e-6
    lambda_min: float = 1e-4
    max_refresh: int | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ConfigurationError("qn.L must be at least 1.")
        if self.lambda_S <= 0 or self.lambda_min <= 0:
            raise ConfigurationError("qn.lambda_S and qn.lambda_min must be positive.")
        if self.max_refresh is None:
            object.__setattr__(self, "max_refresh", self.L)
        if self.max_refresh < 1:
            raise ConfigurationError("qn.max_refresh must be at least 1.")

    @classmethod
    def default_for(cls, dim, L=None, lambda_S=1e-6, lambda_min=1e-4, max_refresh=None):
        params = cls(
            L=L or max(25, math.ceil(1.5 * dim)),
            lambda_S=lambda_S,
            lambda_min=lambda_min,
            max_refresh=max_refresh,
        )
        params.validate_for(dim)
        return params

    def validate_for(self, dim):
        if self.L < dim:
            raise ConfigurationError(f"qn.L = {self.L} must be at least d = {dim}.")


@dataclass(frozen=True, eq=False)
class SecantBuffer:
    """최근 L 개 단위 방향 S 와 헤시안-벡터 곱 Y. 행은 최신 순.

    Attributes:
        S (np.ndarray): L×d 단위 방향.
        Y (np.ndarray): L×d 헤시안-벡터 곱.
        stream (RngStream): 임의 방향용 난수 스트림.
    """

    S: np.ndarray
    Y: np.ndarray
    stream: object

    @property
    def L(self):
        return self.S.shape[0]

    @property
    def dim(self):
        return self.S.shape[1]

    def push(self, s, y):
        """(s, y) 를 맨 앞에 넣고 가장 오래된 쌍을 버린 새 버퍼를 반환합니다."""
        S = np.vstack([s[None, :], self.S[:-1]])
        Y = np.vstack([y[None, :], self.Y[:-1]])
        return replace(self, S=S, Y=Y)

    def gram_floor(self):
        return float(np.linalg.eigvalsh(self.S.T @ self.S / self.L).min())

    def hessian_estimate(self):
        """Ĥ = YᵀS(SᵀS)^{-1} (최소제곱 회귀, 대칭화하지 않음)."""
        coef, *_ = np.linalg.lstsq(self.S, self.Y, rcond=None)
        return coef.T


def random_direction(rng, dim):
    direction = rng.standard_normal(dim)
    return direction / np.linalg.norm(direction)


def init_secant_buffer(H0, params, stream, dim=None):
    """L 개의 임의 단위 방향 s_j 와 y_j = H0·s_j 로 버퍼를 초기화합니다.

    Args:
        H0 (np.ndarray | None): 초기 헤시안 추정. None 이면 단위행렬.
        params (QnParams): 준뉴턴 설정.
        stream (RngStream): 체인 난수 스트림.
        dim (int | None): H0 가 None 일 때의 차원.
    """
    if H0 is None:
        if dim is None:
            raise ConfigurationError("Identity secant initialisation needs the dimension.")
        H0 = np.eye(dim)
    H0 = np.asarray(H0, dtype=float)
    dim = H0.shape[0]
    params.validate_for(dim)
    rng = stream.generator(0, Purpose.SECANT_INIT)
    S = rng.standard_normal((params.L, dim))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    return SecantBuffer(S=S, Y=S @ H0.T, stream=stream)


def secant_conditioner(buffer, params):
    """버퍼에서 Ĥ 를 추정하고 P = (ĤᵀĤ + τI)^{-1/2} 를 만듭니다.

    τ 는 λ_min(ĤᵀĤ) <= λ̲² 이면 λ̲², 아니면 0 입니다.
    """
    estimate = buffer.hessian_estimate()
    gram = estimate.T @ estimate
    floor = params.lambda_min**2
    tau = floor if np.linalg.eigvalsh(0.5 * (gram + gram.T)).min() <= floor else 0.0
    conditioner = sym_inv_sqrt(gram, tau)
    return replace(conditioner, hessian_estimate=estimate)


def rqn_step(buffer, theta, theta_prev, hvp, params, iteration=0):
    """한 번의 rQN 조건화 단계: secant 쌍을 갱신하고 P_b 를 계산합니다.

    Args:
        buffer (SecantBuffer): 현재 버퍼.
        theta, theta_prev (np.ndarray): θ_b, θ_{b-1}.
        hvp: 방향 -> 이번 반복 재표본 계획의 헤시안-벡터 곱.
        params (QnParams): 준뉴턴 설정.
        iteration (int): 임의 방향 하위 스트림을 고르는 반복 번호.

    Returns:
        tuple[ConditioningMatrix, SecantBuffer]

    Raises:
        ConditioningFailureError: 교체 한도를 다 써도 SᵀS 가 퇴화된 경우.
    """
    rng = buffer.stream.generator(iteration, Purpose.DIRECTION)
    step = np.asarray(theta, dtype=float) - np.asarray(theta_prev, dtype=float)
    norm = np.linalg.norm(step)
    if norm <= 1e-14 * max(1.0, float(np.linalg.norm(theta))):
        direction = random_direction(rng, buffer.dim)
    else:
        direction = step / norm
    buffer = buffer.push(direction, np.asarray(hvp(direction), dtype=float))

    refreshes = 0
    while buffer.gram_floor() < params.lambda_S:
        if refreshes >= params.max_refresh:
            raise ConditioningFailureError(
                f"Secant directions stayed degenerate after {refreshes} refreshes.",
                iteration=iteration,
            )
        direction = random_direction(rng, buffer.dim)
        buffer = buffer.push(direction, np.asarray(hvp(direction), dtype=float))
        refreshes += 1
    if refreshes:
        logger.debug(f"Secant buffer refreshed {refreshes} time(s) at b={iteration}")

    conditioner = secant_conditioner(buffer, params)
    return replace(conditioner, refreshes=refreshes), buffer
