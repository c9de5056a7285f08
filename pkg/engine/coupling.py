from dataclasses import dataclass

import numpy as np
from scipy import linalg

from objective.evaluation import Want, evaluate
from objective.exceptions import ConfigurationError, PlanMismatchError
from objective.specs import as_parameter
from resampling.plans import unit_plan
from .chains import Method


@dataclass(frozen=True, eq=False)
class CouplingOracle:
    """선형 결합 과정 θ*_{b+1} − θ̂ = Ψ(θ*_b − θ̂) − γP̄ G_plan(θ̂) 의 계수.

    Attributes:
        psi (np.ndarray): 자기회귀 행렬 Ψ.
        p_bar (np.ndarray): 극한 조건화 행렬 P̄.
        center (np.ndarray): θ̂_n.
        gamma (float): 학습률.
    """

    psi: np.ndarray
    p_bar: np.ndarray
    center: np.ndarray
    gamma: float


def build_oracle(model, data, theta_hat, method, gamma):
    """rNR/rQN 은 Ψ = (1−γ)I, P̄ = H⁻¹, rGD 는 Ψ = I − γH, P̄ = I."""
    data = model.prepare(data)
    center = as_parameter(theta_hat, model.resolve_dim(data))
    hessian = evaluate(model, data, center, unit_plan(data.n), Want.HESSIAN).hessian
    eye = np.eye(center.size)
    method = Method(method)
    if method is Method.RGD:
        psi, p_bar = eye - gamma * hessian, eye
    else:
        psi, p_bar = (1.0 - gamma) * eye, linalg.inv(hessian)
    return CouplingOracle(psi=psi, p_bar=p_bar, center=center, gamma=float(gamma))


def coupling_oracle_simulate(oracle, plans, model, data, theta0, expected=None):
    """기록된 체인과 같은 계획으로 선형 결합 경로 θ*_1, …, θ*_T 를 재생합니다.

    Args:
        oracle (CouplingOracle): 결합 계수.
        plans (Sequence[ResamplePlan]): 체인이 사용한 계획 (run_chain(record_plans=True)).
        theta0: θ*_0 (보통 체인의 θ0).
        expected (int | None): 기록된 체인의 반복 수. 계획 수와 다르면 오류.

    Raises:
        PlanMismatchError: 계획 수가 체인 길이와 다른 경우.
    """
    if plans is None:
        raise ConfigurationError("Replaying a chain needs its recorded plans.")
    if expected is not None and len(plans) != expected:
        raise PlanMismatchError(f"Got {len(plans)} plans for a chain of {expected} draws.")
    data = model.prepare(data)
    theta = as_parameter(theta0, oracle.center.size)
    path = np.empty((len(plans), theta.size))
    for b, plan in enumerate(plans):
        gradient = evaluate(model, data, oracle.center, plan, Want.GRADIENT).gradient
        theta = oracle.center + oracle.psi @ (theta - oracle.center) - oracle.gamma * (oracle.p_bar @ gradient)
        path[b] = theta
    return path


def replay_chain(oracle, chain, model, data):
    """DrawChain 전체 (번인 포함) 에 대응하는 θ* 경로."""
    total = chain.burned.shape[0] + chain.draws.shape[0]
    return coupling_oracle_simulate(
        oracle, chain.plans, model, data, chain.config.theta0, expected=total
    )
