class EstimationError(Exception):
    """추정/추론 과정에서 발생하는 모든 오류의 기본 클래스.

    Attributes:
        category (str): diagnostics.json 에 기록되는 오류 분류.
        exit_code (int): CLI 종료 코드 (2: 설정 오류, 3: 수치 오류).
    """

    category = "estimation"
    exit_code = 3

    def __init__(self, message, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def as_dict(self):
        return {"category": self.category, "message": self.message, **self.detail}


class ConfigurationError(EstimationError):
    category = "config"
    exit_code = 2


class PlanMismatchError(EstimationError):
    category = "plan-mismatch"
    exit_code = 2


class NumericalEvaluationError(EstimationError):
    category = "numerical"

    def __init__(self, message, row=None, **detail):
        super().__init__(message, row=row, **detail)
        self.row = row


class InvalidDirectionError(EstimationError):
    category = "numerical"


class SingularMatrixError(EstimationError):
    category = "singular"


class ConditioningFailureError(EstimationError):
    category = "conditioning"


class DivergenceError(EstimationError):
    category = "divergence"

    def __init__(self, message, iteration=None, last_finite=None, history=None):
        super().__init__(
            message,
            iteration=iteration,
            last_finite=None if last_finite is None else list(map(float, last_finite)),
        )
        self.iteration = iteration
        self.last_finite = last_finite
        # 발산 직전까지의 반복값 (classical_optimize 에서 사용)
        self.history = history


class InsufficientDrawsError(EstimationError):
    category = "insufficient-draws"
