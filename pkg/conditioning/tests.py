import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from objective.exceptions import ConditioningFailureError, ConfigurationError, SingularMatrixError
from resampling.streams import RngStream
from .matrices import Provenance, identity_conditioner, nr_conditioner, sym_inv_sqrt
from .secant import QnParams, SecantBuffer, init_secant_buffer, rqn_step, secant_conditioner


@pytest.fixture
def spd_matrix():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4))
    return A @ A.T + 0.5 * np.eye(4)


def test_sym_inv_sqrt_simple_cases():
    """대각/단위 행렬의 역제곱근 테스트"""
    assert_allclose(sym_inv_sqrt(np.eye(3)).matrix, np.eye(3))
    assert_allclose(sym_inv_sqrt(np.diag([4.0, 9.0])).matrix, np.diag([0.5, 1.0 / 3.0]))


def test_sym_inv_sqrt_defining_property(spd_matrix):
    """R(A + τI)R = I 테스트"""
    tau = 0.3
    root = sym_inv_sqrt(spd_matrix, tau).matrix

    identity = root @ (spd_matrix + tau * np.eye(4)) @ root
    assert np.linalg.norm(identity - np.eye(4)) < 1e-10
    assert_allclose(root, root.T)


def test_sym_inv_sqrt_commutes_with_rotation(spd_matrix):
    """직교 변환과의 교환 테스트"""
    Q = stats.ortho_group.rvs(4, random_state=3)
    tau = 0.1

    rotated = sym_inv_sqrt(Q @ spd_matrix @ Q.T, tau).matrix
    expected = Q @ sym_inv_sqrt(spd_matrix, tau).matrix @ Q.T

    assert_allclose(rotated, expected, atol=1e-10)


def test_sym_inv_sqrt_rejects_singular_matrix():
    """특이 행렬 거부 테스트"""
    with pytest.raises(SingularMatrixError):
        sym_inv_sqrt(np.diag([1.0, 0.0]))


def test_nr_conditioner_inverts_positive_definite_hessian(spd_matrix):
    """양정치 헤시안의 역행렬 테스트"""
    conditioner = nr_conditioner(spd_matrix)

    assert conditioner.provenance is Provenance.HESSIAN_INVERSE
    assert not conditioner.fallback
    assert_allclose(conditioner.matrix @ spd_matrix, np.eye(4), atol=1e-10)


def test_nr_conditioner_ridge_only():
    """H = 0 에 ridge 만 있는 경우 테스트"""
    conditioner = nr_conditioner(np.zeros((3, 3)), ridge=20.0, n=1000)

    assert_allclose(conditioner.matrix, 50.0 * np.eye(3))
    assert conditioner.tau_applied == pytest.approx(0.02)


def test_nr_conditioner_falls_back_on_indefinite_hessian():
    """부정치 헤시안의 |고윳값| 대체 테스트"""
    conditioner = nr_conditioner(np.diag([2.0, -4.0]))

    assert conditioner.fallback
    assert conditioner.provenance is Provenance.MODIFIED_HESSIAN_INVERSE
    assert_allclose(conditioner.matrix, np.diag([0.5, 0.25]))


def test_nr_conditioner_modified_matches_absolute_eigenvalues():
    """|고윳값| 수정 역행렬 테스트"""
    conditioner = nr_conditioner(np.diag([1.0, -1.0]), modify=True)

    assert not conditioner.fallback
    assert_allclose(conditioner.matrix, np.eye(2))


def test_nr_conditioner_singular_after_ridge():
    """ridge 뒤에도 특이한 헤시안 오류 테스트"""
    with pytest.raises(SingularMatrixError):
        nr_conditioner(np.zeros((2, 2)))


def test_identity_conditioner():
    """단위 조건화 행렬 테스트"""
    conditioner = identity_conditioner(3)

    assert conditioner.provenance is Provenance.IDENTITY
    assert_allclose(conditioner.apply(np.arange(3.0)), np.arange(3.0))


def test_qn_params_defaults():
    """준뉴턴 기본 설정 테스트"""
    assert QnParams.default_for(4).L == 25
    assert QnParams.default_for(30).L == 45
    assert QnParams.default_for(4).max_refresh == 25
    with pytest.raises(ConfigurationError):
        QnParams.default_for(5, L=3)


def test_secant_buffer_recovers_fixed_hessian():
    """고정 헤시안의 secant 추정 복원 테스트"""
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 5))
    H = A @ A.T + np.eye(5)
    params = QnParams.default_for(5, L=25)
    buffer = init_secant_buffer(None, params, RngStream(9), dim=5)

    theta_prev, theta = np.zeros(5), rng.standard_normal(5)
    for b in range(2 * params.L):
        conditioner, buffer = rqn_step(buffer, theta, theta_prev, lambda s: H @ s, params, iteration=b)
        theta_prev, theta = theta, theta + rng.standard_normal(5)

    S, Y = buffer.S, buffer.Y
    residual = S @ np.linalg.solve(S.T @ S, S.T @ Y) - Y
    assert np.abs(residual).max() < 1e-10
    assert_allclose(conditioner.hessian_estimate, H, atol=1e-10)
    assert_allclose(conditioner.matrix, np.linalg.inv(H), atol=1e-8)


def test_secant_conditioner_eigenvalue_ceiling():
    """조건화 행렬의 최대 고윳값 상한 테스트"""
    params = QnParams.default_for(3, L=6, lambda_min=0.1)
    H = np.diag([1.0, 1e-3, 1e-6])
    buffer = init_secant_buffer(H, params, RngStream(2))

    conditioner = secant_conditioner(buffer, params)

    assert conditioner.tau_applied == pytest.approx(0.01)
    assert np.linalg.eigvalsh(conditioner.matrix).max() <= 1.0 / params.lambda_min + 1e-9


def test_rqn_step_refreshes_degenerate_directions():
    """퇴화된 secant 방향 교체 테스트"""
    params = QnParams(L=2, lambda_S=1e-3, max_refresh=10)
    S = np.array([[1.0, 0.0], [1.0, 0.0]])
    buffer = SecantBuffer(S=S, Y=S.copy(), stream=RngStream(4))

    conditioner, buffer = rqn_step(
        buffer, np.array([1.0, 0.0]), np.zeros(2), lambda s: s, params, iteration=0
    )

    assert conditioner.refreshes >= 1
    assert buffer.gram_floor() >= params.lambda_S


def test_rqn_step_uses_random_direction_when_chain_is_stuck():
    """θ 가 멈췄을 때 임의 방향 사용 테스트"""
    params = QnParams(L=2)
    buffer = init_secant_buffer(None, params, RngStream(4), dim=2)
    theta = np.array([0.5, 0.5])

    _, updated = rqn_step(buffer, theta, theta.copy(), lambda s: 2.0 * s, params, iteration=3)

    assert np.linalg.norm(updated.S[0]) == pytest.approx(1.0)
    assert_allclose(updated.Y[0], 2.0 * updated.S[0])


def test_rqn_step_gives_up_after_refresh_budget():
    """교체 한도 초과 오류 테스트"""
    params = QnParams(L=2, lambda_S=10.0, max_refresh=3)
    buffer = init_secant_buffer(None, params, RngStream(4), dim=2)

    with pytest.raises(ConditioningFailureError):
        rqn_step(buffer, np.ones(2), np.zeros(2), lambda s: s, params, iteration=0)
