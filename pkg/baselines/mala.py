import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from objective.evaluation import Want, evaluate
from objective.exceptions import ConfigurationError, NumericalEvaluationError
from objective.specs import as_parameter
from resampling.plans import unit_plan
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

FIXED_EFFECT_PRIOR_VARIANCE = 10.0


@dataclass(frozen=True)
class FlatPrior:
    def log_density(self, theta):
        return 0.0

    def gradient(self, theta):
        return np.zeros_like(theta)


@dataclass(frozen=True)
class GaussianPrior:
    """지정한 좌표에만 N(mean, variance) 를 두는 사전분포 (나머지는 평탄)."""

    indices: tuple
    mean: float = 0.0
    variance: float = FIXED_EFFECT_PRIOR_VARIANCE

    def log_density(self, theta):
        diff = theta[list(self.indices)] - self.mean
        return -0.5 * float(diff @ diff) / self.variance

    def gradient(self, theta):
        out = np.zeros_like(theta)
        out[list(self.indices)] = -(theta[list(self.indices)] - self.mean) / self.variance
        return out


def default_prior(model):
    """고정효과 좌표에는 N(0, 10), 나머지는 평탄한 사전분포."""
    if model.fixed_effects:
        return GaussianPrior(indices=tuple(model.fixed_effects))
    return FlatPrior()


def heuristic_step(dim, target_accept=0.57):
    """γ = −2 log(target)/d."""
    return -2.0 * math.log(target_accept) / dim


@dataclass(frozen=True)
class MalaConfig:
    """MALA 설정.

    Attributes:
        gamma (float): 단계 크기 γ.
        target_accept (float): 목표 채택률.
        preconditioner (np.ndarray | None): 평균 목적함수 기준 [H_n(θ̂)]⁻¹.
            U = n·Q_n 이므로 제안분포에는 preconditioner/n 이 쓰입니다. None 이면 단위행렬.
        prior: log_density/gradient 를 갖는 사전분포. None 이면 default_prior(model).
        tune (bool): 번인 동안 log γ 를 확률적 근사로 조정.
        burn (int): 번인 (조정) 반복 수.
        seed (int): 시드.
    """

    gamma: float
    target_accept: float = 0.57
    preconditioner: np.ndarray | None = None
    prior: object | None = None
    tune: bool = False
    burn: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigurationError("MALA step size must be positive.")
        if not 0 < self.target_accept < 1:
            raise ConfigurationError("target_accept must lie in (0, 1).")
        if self.burn < 0:
            raise ConfigurationError("MALA burn must be non-negative.")


@dataclass(frozen=True, eq=False)
class MalaResult:
    draws: np.ndarray
    burned: np.ndarray
    acceptance_rate: float
    gamma: float
    accepted: np.ndarray
    method: str = "mala"


class _Posterior:
    """U(θ) = n·Q_n(θ) − log prior(θ) 와 ∇U."""

    def __init__(self, model, data, prior):
        self.model = model
        self.data = data
        self.prior = prior
        self.plan = unit_plan(data.n)

    def __call__(self, theta):
        evaluation = evaluate(self.model, self.data, theta, self.plan, Want.VALUE | Want.GRADIENT)
        n = self.data.n
        energy = n * evaluation.value - self.prior.log_density(theta)
        return energy, n * evaluation.gradient - self.prior.gradient(theta)


def mala_sample(model, data, theta0, config, B, stream=None):
    """(전처리된) MALA 표본추출.

    제안: θ' = θ − γM∇U(θ) + √(2γ)·N(0, M). 채택 확률은 목표밀도 비와
    양방향 제안밀도 비를 모두 포함합니다. tune=True 이면 번인 동안
    log γ += (a_t − target)/√(t+1) 로 조정하고, 번인 후반부 log γ 의
    평균에서 고정합니다.

    Returns:
        MalaResult: 번인 이후 B 개의 draw 와 (번인 이후) 실현 채택률.
    """
    data = model.prepare(data)
    theta = as_parameter(theta0, model.resolve_dim(data))
    dim = theta.size
    prior = config.prior or default_prior(model)
    if not np.isfinite(prior.log_density(theta)):
        raise ConfigurationError("Prior log-density must be finite at theta0.")
    if config.preconditioner is None:
        metric = np.eye(dim)
    else:
        metric = np.asarray(config.preconditioner, dtype=float) / data.n
    metric = 0.5 * (metric + metric.T)
    root = linalg.cholesky(metric, lower=True)
    inverse = linalg.cho_solve((root, True), np.eye(dim))

    posterior = _Posterior(model, data, prior)
    stream = stream or RngStream(config.seed)
    log_gamma = math.log(config.gamma)
    tuned_sum, tuned_count = 0.0, 0
    energy, grad = posterior(theta)

    def log_proposal(target, source, source_grad, gamma):
        diff = target - (source - gamma * metric @ source_grad)
        return -0.25 / gamma * float(diff @ inverse @ diff)

    total = config.burn + B
    history = np.empty((total, dim))
    accepted = np.zeros(total, dtype=bool)
    for t in range(total):
        gamma = math.exp(log_gamma)
        rng = stream.generator(t, Purpose.MALA)
        proposal = theta - gamma * metric @ grad + math.sqrt(2.0 * gamma) * root @ rng.standard_normal(dim)
        try:
            new_energy, new_grad = posterior(proposal)
            log_ratio = (
                energy
                - new_energy
                + log_proposal(theta, proposal, new_grad, gamma)
                - log_proposal(proposal, theta, grad, gamma)
            )
        except NumericalEvaluationError:
            log_ratio = -np.inf
        accept_prob = math.exp(min(0.0, log_ratio)) if np.isfinite(log_ratio) else 0.0
        if rng.uniform() < accept_prob:
            theta, energy, grad = proposal, new_energy, new_grad
            accepted[t] = True
        if config.tune and t < config.burn:
            log_gamma += (accept_prob - config.target_accept) / math.sqrt(t + 1)
            if t >= config.burn // 2:
                tuned_sum += log_gamma
                tuned_count += 1
            if t == config.burn - 1:
                log_gamma = tuned_sum / tuned_count
        history[t] = theta

    rate = float(accepted[config.burn :].mean())
    logger.info(f"MALA finished: acceptance={rate:.3f} gamma={math.exp(log_gamma):.4g}")
    return MalaResult(
        draws=history[config.burn :],
        burned=history[: config.burn],
        acceptance_rate=rate,
        gamma=math.exp(log_gamma),
        accepted=accepted[config.burn :],
    )
