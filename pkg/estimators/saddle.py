import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from engine.classical import classical_optimize
from objective.datasets import Dataset
from objective.exceptions import ConfigurationError
from objective.specs import ModelSpec
from resampling.streams import Purpose, RngStream

logger = logging.getLogger(__name__)

DIVERGENCE_RADIUS = 10.0


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Q(θ) = ½(θ − θ× − z)ᵀH(θ − θ× − z) 의 행 평균 (z 는 행의 1번째 열부터).

    z 가 모두 0 인 데이터에서는 안장점/최소점이 θ× 인 순수 이차함수이고,
    z 가 잡음이면 모든 재표본에서 헤시안이 H 로 일정한 위치 모형입니다.

    Attributes:
        H (np.ndarray): 대칭 행렬 (부정치 가능).
        center (np.ndarray): θ×.
        eigenvalues (np.ndarray): 내림차순 고윳값.
        eigenvectors (np.ndarray): 열이 고유벡터 q_s.
    """

    H: np.ndarray
    center: np.ndarray
    eigenvalues: np.ndarray = field(init=False)
    eigenvectors: np.ndarray = field(init=False)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ConfigurationError("H must be a square matrix.")
        if not np.allclose(H, H.T, atol=1e-12):
            raise ConfigurationError("H must be symmetric.")
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.size != H.shape[0]:
            raise ConfigurationError("center must have the dimension of H.")
        values, vectors = linalg.eigh(H)
        order = np.argsort(values)[::-1]
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "eigenvalues", values[order])
        object.__setattr__(self, "eigenvectors", vectors[:, order])

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def n_positive(self):
        return int(np.sum(self.eigenvalues > 0))

    def value(self, theta):
        diff = np.asarray(theta, dtype=float) - self.center
        return 0.5 * float(diff @ self.H @ diff)

    def gradient(self, theta):
        return self.H @ (np.asarray(theta, dtype=float) - self.center)

    @property
    def spec(self):
        H, center = self.H, self.center

        def batch_loss(rows, theta):
            diff = theta - center - rows[:, 1:]
            return 0.5 * np.einsum("ij,jk,ik->i", diff, H, diff)

        def batch_gradient(rows, theta):
            return (theta - center - rows[:, 1:]) @ H

        def batch_hessian(rows, theta):
            return np.broadcast_to(H, (rows.shape[0], *H.shape))

        def loss(row, theta):
            return float(batch_loss(row[None, :], theta)[0])

        def gradient(row, theta):
            return batch_gradient(row[None, :], theta)[0]

        def hessian(row, theta):
            return H.copy()

        return ModelSpec(
            name="quadratic",
            loss=loss,
            gradient=gradient,
            hessian=hessian,
            batch_loss=batch_loss,
            batch_gradient=batch_gradient,
            batch_hessian=batch_hessian,
            dim=self.dim,
        )

    def zero_data(self):
        """z = 0 한 행짜리 데이터셋 (순수 이차함수 평가용)."""
        return Dataset(rows=np.zeros((1, self.dim + 1)))


def make_quadratic(H, center=None):
    H = np.asarray(H, dtype=float)
    center = np.zeros(H.shape[0]) if center is None else center
    return QuadraticModel(H=H, center=center)


def make_saddle(H=None, center=None):
    """안장점 모형. 기본값은 H = diag(1, −1), θ× = 0."""
    H = np.diag([1.0, -1.0]) if H is None else np.asarray(H, dtype=float)
    quadratic = make_quadratic(H, center)
    return quadratic.spec, quadratic


def stylised_rnr(quadratic, theta0, gamma, iters, noise, stream):
    """θ ← θ − γ(H²)^{-1/2}(G(θ) + σZ) 로 잡음 기울기를 흉내 낸 rNR 경로."""
    values = np.abs(quadratic.eigenvalues)
    if values.min() <= 0:
        raise ConfigurationError("The stylised rNR needs a non-singular H.")
    vectors = quadratic.eigenvectors
    conditioner = (vectors / values) @ vectors.T
    theta = np.asarray(theta0, dtype=float).copy()
    path = [theta]
    for k in range(iters):
        rng = stream.generator(k, Purpose.NOISE)
        noisy = quadratic.gradient(theta) + noise * rng.standard_normal(quadratic.dim)
        theta = theta - gamma * conditioner @ noisy
        path.append(theta)
    return np.array(path)


def saddle_start(quadratic, c):
    """θ0 = θ× + q1 + c·q_d (q1 은 최대, q_d 는 최소 고윳값의 고유벡터)."""
    vectors = quadratic.eigenvectors
    return quadratic.center + vectors[:, 0] + c * vectors[:, -1]


def saddle_demo(
    c_grid=(0.0, 0.1, 0.5, 1.0, 5.0),
    H=None,
    center=None,
    gamma=0.1,
    iters=50,
    noise=10.0,
    seed=0,
):
    """안장점 주변에서 수정 NR 과 잡음 rNR 의 거동 표를 만듭니다.

    Returns:
        list[dict]: (c, method, theta, q, diverged) 행 목록.
    """
    spec, quadratic = make_saddle(H, center)
    if quadratic.n_positive == 0 or quadratic.n_positive == quadratic.dim:
        logger.info("Saddle demo Hessian is definite; expecting convergence for every method")
    data = quadratic.zero_data()
    stream = RngStream(seed)
    rows = []
    for index, c in enumerate(c_grid):
        theta0 = saddle_start(quadratic, c)
        nr_path = classical_optimize(
            spec, data, theta0, method="nr", gamma=gamma, iters=iters, modify=True,
            divergence_bound=np.inf,
        ).path
        rnr_path = stylised_rnr(quadratic, theta0, gamma, iters, noise, stream.child(index))
        for method, path in (("nr", nr_path), ("rnr", rnr_path)):
            theta = path[-1]
            rows.append(
                {
                    "c": float(c),
                    "method": method,
                    "theta": [float(v) for v in theta],
                    "q": quadratic.value(theta),
                    "diverged": bool(np.linalg.norm(theta - quadratic.center) > DIVERGENCE_RADIUS),
                }
            )
    return rows
