from dataclasses import dataclass

import numpy as np

from objective.exceptions import ConfigurationError


@dataclass(frozen=True)
class PenaltySchedule:
    """반복 번호에 따라 감소하는 벌점 계수 λ_b.

    b < duration 동안 λ0, 그 뒤 매 반복 decay 배씩 줄어들고 b >= stop 이면 0 입니다.
    stop 이 None 이면 0 으로 끊지 않습니다.
    """

    lambda0: float
    decay: float = 0.9
    duration: int = 0
    stop: int | None = None

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ConfigurationError("Penalty lambda must be non-negative.")
        if not 0 < self.decay <= 1:
            raise ConfigurationError("Penalty decay must lie in (0, 1].")
        if self.duration < 0:
            raise ConfigurationError("Penalty duration must be non-negative.")

    def at(self, iteration):
        if iteration is None or iteration < self.duration:
            return float(self.lambda0)
        if self.stop is not None and iteration >= self.stop:
            return 0.0
        return float(self.lambda0 * self.decay ** (iteration - self.duration + 1))


@dataclass(frozen=True)
class Penalty:
    """(λ/2n)‖θ − anchor‖² 이차 벌점.

    Attributes:
        lam (float | PenaltySchedule): 고정 λ 또는 스케줄.
        anchor (np.ndarray): 벌점 중심 (보통 θ0).
    """

    lam: object
    anchor: np.ndarray

    def __post_init__(self):
        if not isinstance(self.lam, PenaltySchedule):
            if float(self.lam) < 0:
                raise ConfigurationError("Penalty lambda must be non-negative.")
            object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(-1))

    def lambda_at(self, iteration):
        if isinstance(self.lam, PenaltySchedule):
            return self.lam.at(iteration)
        return self.lam

    def terms(self, theta, n, iteration=None):
        """(값, 기울기, 헤시안) 벌점 항을 반환합니다."""
        scale = self.lambda_at(iteration) / n
        diff = theta - self.anchor
        value = 0.5 * scale * float(diff @ diff)
        return value, scale * diff, scale * np.eye(theta.size)


def wrap_penalty(inner, lam, anchor):
    """inner 모델에 이차 벌점을 붙인 ModelSpec 을 반환합니다."""
    return inner.with_penalty(Penalty(lam=lam, anchor=anchor))
