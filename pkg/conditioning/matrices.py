import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from objective.exceptions import SingularMatrixError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-14


class Provenance(str, enum.Enum):
    IDENTITY = "identity"
    HESSIAN_INVERSE = "hessian-inverse"
    MODIFIED_HESSIAN_INVERSE = "modified-hessian-inverse"
    QUASI_NEWTON = "quasi-newton"


@dataclass(frozen=True, eq=False)
class ConditioningMatrix:
    """갱신 단계에서 기울기에 곱하는 대칭 양정치 행렬 P_b.

    Attributes:
        matrix (np.ndarray): d×d 대칭 양정치 행렬.
        provenance (Provenance): 생성 방식.
        tau_applied (float): 실제로 더한 정규화 크기.
        fallback (bool): 양정치가 아니어서 |고윳값| 수정으로 대체했는지 여부.
        hessian_estimate (np.ndarray | None): 준뉴턴 최소제곱 헤시안 추정치 Ĥ_b.
        refreshes (int): 이번 단계에서 임의 방향으로 교체한 secant 쌍 수.
    """

    matrix: np.ndarray
    provenance: Provenance
    tau_applied: float = 0.0
    fallback: bool = False
    hessian_estimate: np.ndarray | None = None
    refreshes: int = 0

    def apply(self, vector):
        return self.matrix @ vector

    @property
    def dim(self):
        return self.matrix.shape[0]


def _symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return 0.5 * (matrix + matrix.T)


def identity_conditioner(dim):
    return ConditioningMatrix(matrix=np.eye(dim), provenance=Provenance.IDENTITY)


def sym_inv_sqrt(A, tau=0.0, provenance=Provenance.QUASI_NEWTON):
    """고유분해로 (A + τI)^{-1/2} 를 계산합니다.

    Raises:
        SingularMatrixError: A + τI 의 최소 고윳값이 1e-14 이하인 경우.
    """
    A = _symmetrize(A)
    values, vectors = linalg.eigh(A + tau * np.eye(A.shape[0]))
    if values.min() <= EIGEN_FLOOR:
        raise SingularMatrixError(
            f"Smallest eigenvalue {values.min():.3e} is not positive; consider a ridge."
        )
    root = (vectors * values**-0.5) @ vectors.T
    return ConditioningMatrix(
        matrix=_symmetrize(root), provenance=provenance, tau_applied=float(tau)
    )


def _modified_inverse(H, shift):
    values, vectors = linalg.eigh(H)
    values = np.abs(values) + shift
    if values.min() <= EIGEN_FLOOR:
        raise SingularMatrixError("Hessian is singular even after |eigenvalue| modification and ridge.")
    return _symmetrize((vectors / values) @ vectors.T)


def nr_conditioner(H, modify=False, ridge=0.0, n=1):
    """뉴턴-랩슨 조건화 행렬 (H + λ/n·I)^{-1} 또는 ((HᵀH)^{1/2} + λ/n·I)^{-1}.

    modify=False 인데 H + λ/n·I 가 양정치가 아니면 |고윳값| 수정으로 대체하고
    fallback=True 로 기록합니다.

    Args:
        H (np.ndarray): 대칭화된 헤시안.
        modify (bool): |고윳값| 수정 사용 여부.
        ridge (float): 벌점 계수 λ.
        n (int): 표본 크기.

    Raises:
        SingularMatrixError: 수정과 ridge 뒤에도 특이한 경우.
    """
    H = _symmetrize(H)
    shift = ridge / n
    if modify:
        return ConditioningMatrix(
            matrix=_modified_inverse(H, shift),
            provenance=Provenance.MODIFIED_HESSIAN_INVERSE,
            tau_applied=shift,
        )
    try:
        factor = linalg.cho_factor(H + shift * np.eye(H.shape[0]))
    except linalg.LinAlgError:
        logger.warning("Hessian is not positive definite, falling back to |eigenvalue| modification")
        return ConditioningMatrix(
            matrix=_modified_inverse(H, shift),
            provenance=Provenance.MODIFIED_HESSIAN_INVERSE,
            tau_applied=shift,
            fallback=True,
        )
    inverse = linalg.cho_solve(factor, np.eye(H.shape[0]))
    return ConditioningMatrix(
        matrix=_symmetrize(inverse), provenance=Provenance.HESSIAN_INVERSE, tau_applied=shift
    )
