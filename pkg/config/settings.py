import os
from pathlib import Path
from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv("SECRET_KEY", "resampled-inference-local")

DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    # 3rd party apps
    "rest_framework",
    # my apps
    "objective",
    "resampling",
    "conditioning",
    "engine",
    "inference",
    "baselines",
    "estimators",
    "studies",
]

# 데이터베이스는 사용하지 않음 (결과는 모두 파일로 저장)
DATABASES = {}

LANGUAGE_CODE = "ko-kr"

TIME_ZONE = "Asia/Seoul"

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# drf 설정 (시리얼라이저는 설정 검증과 리포트 직렬화에만 사용)
REST_FRAMEWORK = {
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": [],
    "UNAUTHENTICATED_USER": None,
    "COERCE_DECIMAL_TO_STRING": False,
}

# 재현성을 위한 기본 시드 (64-bit unsigned)
RESAMPLING_SEED = int(os.getenv("RESAMPLING_SEED", "20240101"))

RESAMPLING_OUTPUT_DIR = Path(os.getenv("RESAMPLING_OUTPUT_DIR", BASE_DIR / "outputs"))

RESAMPLING_MC_WORKERS = int(os.getenv("RESAMPLING_MC_WORKERS", "1"))

# Mroz 데이터는 저장소에 포함하지 않음, 로컬 경로만 지정
MROZ_CSV_PATH = os.getenv("MROZ_CSV_PATH", str(BASE_DIR / "data" / "mroz.csv"))

# 추정 기본값 (CLI 설정 파일 -> CLI 플래그 순으로 덮어씀)
ESTIMATION_DEFAULTS = {
    "method": "rqn",
    "scheme": "gaussian",
    "cluster_aware": False,
    "gamma": 0.1,
    "alpha": 0.05,
    "B": 2000,
    "burn": None,  # None이면 max(50, ceil(log(0.01)/log(1-gamma)))
    "m": None,  # None이면 m = n
    "qn.L": None,  # None이면 max(25, ceil(1.5 * d))
    "qn.lambda_S": 1e-6,
    "qn.lambda_min": 1e-4,
    "qn.max_refresh": None,  # None이면 L
    "qn.init": "hessian",
    "penalty.enabled": False,
    "penalty.lambda0": 20.0,
    "penalty.decay": 0.9,
    "penalty.duration": None,  # None이면 burn / 2
    "mc.replications": 200,
    "mc.workers": RESAMPLING_MC_WORKERS,
    "divergence_bound": 1e8,
}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "[{asctime}] {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": os.getenv("RESAMPLING_LOG_LEVEL", "INFO"),
    },
}
