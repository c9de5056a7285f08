from dataclasses import dataclass

import numpy as np
from scipy import linalg

from objective.evaluation import Want, evaluate, row_gradients
from objective.exceptions import SingularMatrixError
from objective.specs import as_parameter
from resampling.plans import unit_plan


@dataclass(frozen=True, eq=False)
class SandwichEstimate:
    """V = H⁻¹ Σ H⁻¹.

    Attributes:
        bread (np.ndarray): 전체 표본 헤시안의 역행렬.
        meat (np.ndarray): 점수의 외적 평균 Σ_n.
        V (np.ndarray): 샌드위치 분산.
        cluster_mode (bool): 클러스터 합산 점수 사용 여부.
        n (int): 표본 크기.
    """

    bread: np.ndarray
    meat: np.ndarray
    V: np.ndarray
    cluster_mode: bool
    n: int

    def standard_errors(self):
        return np.sqrt(np.diag(self.V) / self.n)


def sandwich(model, data, theta_hat, cluster=False):
    """θ̂ 에서의 샌드위치 분산 추정.

    Raises:
        SingularMatrixError: 헤시안이 특이한 경우 (벌점/ridge 필요).
        ConfigurationError: cluster=True 인데 cluster_ids 가 없는 경우.
    """
    data = model.prepare(data)
    theta_hat = as_parameter(theta_hat, model.resolve_dim(data))
    hessian = evaluate(model, data, theta_hat, unit_plan(data.n), Want.HESSIAN).hessian
    if np.linalg.eigvalsh(hessian).min() <= 1e-14 * max(1.0, np.abs(hessian).max()):
        raise SingularMatrixError("Hessian at the estimate is singular; add a ridge penalty.")
    bread = linalg.inv(hessian)
    bread = 0.5 * (bread + bread.T)

    scores = row_gradients(model, data, theta_hat)
    if cluster:
        labels, codes = data.cluster_index()
        sums = np.zeros((len(labels), scores.shape[1]))
        np.add.at(sums, codes, scores)
        scores = sums
    meat = scores.T @ scores / data.n
    V = bread @ meat @ bread
    return SandwichEstimate(
        bread=bread, meat=meat, V=0.5 * (V + V.T), cluster_mode=bool(cluster), n=data.n
    )


def delta_method_se(theta_hat, V, grad_h, n):
    """√(∇hᵀ V ∇h / n). grad_h 는 벡터 또는 θ -> 벡터 함수."""
    theta_hat = as_parameter(theta_hat)
    if callable(grad_h):
        grad_h = grad_h(theta_hat)
    grad_h = np.asarray(grad_h, dtype=float).reshape(-1)
    matrix = V.V if isinstance(V, SandwichEstimate) else np.asarray(V, dtype=float)
    return float(np.sqrt(grad_h @ matrix @ grad_h / n))
