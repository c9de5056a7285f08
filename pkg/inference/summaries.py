import logging
from dataclasses import dataclass, field

import numpy as np

from inference.serializers import finite_or_none
from objective.exceptions import ConfigurationError, InsufficientDrawsError

logger = logging.getLogger(__name__)

MIN_DRAWS = 10


def phi(gamma):
    """φ(γ) = γ²/(1 − (1 − γ)²) = γ/(2 − γ). 체인 분산 대비 표본 분산 비율."""
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"phi(gamma) needs gamma in (0, 1], got {gamma}.")
    return gamma / (2.0 - gamma)


def autocorrelation(draws, lag=1):
    """유지 draw 각 좌표의 lag 표본 자기상관. 분산이 0 이면 nan."""
    draws = np.asarray(getattr(draws, "draws", draws), dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] <= lag:
        raise InsufficientDrawsError(f"Autocorrelation at lag {lag} needs more than {lag} draws.")
    centered = draws - draws.mean(axis=0)
    denominator = np.sum(centered**2, axis=0)
    numerator = np.sum(centered[lag:] * centered[:-lag], axis=0) if lag else denominator
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denominator > 0, numerator / np.where(denominator > 0, denominator, 1.0), np.nan)


@dataclass(frozen=True, eq=False)
class InferenceReport:
    """draw 체인에서 얻은 추정치, 표준오차, 분위수 신뢰구간.

    Attributes:
        estimate (np.ndarray): h(θ̄) (기본은 θ̄ 자체).
        se (np.ndarray): 표준오차.
        ci (np.ndarray): k×2 (lo, hi).
        phi_gamma (float): φ(γ).
        adjustment (float): √(m/(nφ(γ))).
        autocorr_lag1 (np.ndarray): 목표값별 lag-1 자기상관.
        names (tuple): 목표 이름.
        alpha (float): 유의수준.
        B (int): draw 수.
        method (str): 출처 태그.
        config (dict): 설정 echo.
    """

    estimate: np.ndarray
    se: np.ndarray
    ci: np.ndarray
    phi_gamma: float
    adjustment: float
    autocorr_lag1: np.ndarray
    names: tuple
    alpha: float
    B: int
    method: str = ""
    config: dict = field(default_factory=dict)

    def rows(self):
        """report.csv 의 행 (coefficient, estimate, se, ci_lo, ci_hi, autocorr1, method). 비유한 값은 None."""
        return [
            {
                "coefficient": name,
                "estimate": finite_or_none(float(self.estimate[j])),
                "se": finite_or_none(float(self.se[j])),
                "ci_lo": finite_or_none(float(self.ci[j, 0])),
                "ci_hi": finite_or_none(float(self.ci[j, 1])),
                "autocorr1": finite_or_none(float(self.autocorr_lag1[j])),
                "method": self.method,
            }
            for j, name in enumerate(self.names)
        ]


def _apply(h, draws):
    if h is None:
        return np.asarray(draws, dtype=float)
    return np.array([np.atleast_1d(h(theta)) for theta in draws], dtype=float)


def _names(names, k):
    if names is not None and len(names) == k:
        return tuple(names)
    return tuple(f"theta_{j + 1}" for j in range(k))


def _quantile_interval(centered, alpha):
    lo, hi = np.quantile(centered, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0, method="linear")
    return np.column_stack([lo, hi])


def summarize(chain, h=None, alpha=0.05, n=None, names=None):
    """draw 체인으로 추정치, 표준오차, 신뢰구간을 계산합니다.

    SE[h] = √((m/(nφ(γ)))·(1/B)Σ(h(θ_b) − h(θ̄))²). 조정 draw
    θ̃_b = θ̄ + √(m/(nφ(γ)))(θ_b − θ̄) 의 중심화 값 h(θ̃_b) − mean h(θ̃) 의
    선형보간 분위수를 h(θ̄) 에 더해 구간을 만듭니다 (부호 반전 없음).

    Args:
        chain (DrawChain): draw 체인.
        h: θ -> 스칼라 또는 벡터. None 이면 각 좌표.
        alpha (float): 유의수준.
        n (int | None): 표본 크기. None 이면 chain.n.
        names (Sequence[str] | None): 목표 이름.

    Raises:
        InsufficientDrawsError: B < 10.
    """
    draws = np.asarray(chain.draws, dtype=float)
    if draws.shape[0] < MIN_DRAWS:
        raise InsufficientDrawsError(
            f"At least {MIN_DRAWS} retained draws are needed, got {draws.shape[0]}."
        )
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1).")
    n = n or chain.n
    phi_gamma = phi(chain.gamma)
    adjustment = float(np.sqrt(chain.effective_m / (n * phi_gamma)))

    theta_bar = draws.mean(axis=0)
    targets = _apply(h, draws)
    center = _apply(h, theta_bar[None, :])[0]
    se = adjustment * np.sqrt(np.mean((targets - center) ** 2, axis=0))

    adjusted = _apply(h, theta_bar + adjustment * (draws - theta_bar))
    ci = center[:, None] + _quantile_interval(adjusted - adjusted.mean(axis=0), alpha)

    return InferenceReport(
        estimate=center,
        se=se,
        ci=ci,
        phi_gamma=phi_gamma,
        adjustment=adjustment,
        autocorr_lag1=autocorrelation(targets, 1),
        names=_names(names, center.size),
        alpha=alpha,
        B=draws.shape[0],
        method=getattr(chain, "method", ""),
    )


def summarize_draws(draws, alpha=0.05, estimate=None, scale=1.0, names=None, method=""):
    """bootstrap/MALA 처럼 바로 분포를 근사하는 draw 의 요약.

    SE = scale·sd(draws), 구간은 estimate + scale·(중심화 draw 의 분위수) 입니다.
    m-out-of-n bootstrap 은 scale = √(m/n) 을 넘깁니다.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.shape[0] < MIN_DRAWS:
        raise InsufficientDrawsError(
            f"At least {MIN_DRAWS} draws are needed, got {draws.shape[0]}."
        )
    mean = draws.mean(axis=0)
    estimate = mean if estimate is None else np.asarray(estimate, dtype=float)
    centered = draws - mean
    se = scale * np.sqrt(np.mean(centered**2, axis=0))
    ci = estimate[:, None] + scale * _quantile_interval(centered, alpha)
    return InferenceReport(
        estimate=estimate,
        se=se,
        ci=ci,
        phi_gamma=1.0,
        adjustment=float(scale),
        autocorr_lag1=autocorrelation(draws, 1),
        names=_names(names, estimate.size),
        alpha=alpha,
        B=draws.shape[0],
        method=method,
    )
