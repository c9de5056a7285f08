import logging
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings

from objective.datasets import Dataset
from objective.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

OUTCOME = "inlf"

REGRESSORS = ("nwifeinc", "educ", "exper", "exper2", "age", "kidslt6", "kidsge6", "const")

# 노동시장 참여 프로빗 (753명) 의 MLE 와 점근 표준오차 (소수 셋째 자리 반올림)
REFERENCE_MLE = dict(zip(REGRESSORS, (-0.012, 0.131, 0.123, -0.002, -0.053, -0.868, 0.036, 0.270)))
REFERENCE_ASE = dict(zip(REGRESSORS, (0.005, 0.025, 0.019, 0.001, 0.008, 0.119, 0.043, 0.509)))


def mroz_available(path=None):
    return Path(path or settings.MROZ_CSV_PATH).is_file()


def load_mroz(path=None):
    """로컬 Mroz CSV 를 읽어 프로빗용 Dataset 을 만듭니다.

    exper2 열이 없으면 expersq 또는 exper² 로 채우고 상수항 const 를 추가합니다.

    Raises:
        ConfigurationError: 파일이나 필요한 열이 없거나 결측값이 있는 경우.
    """
    path = Path(path or settings.MROZ_CSV_PATH)
    if not path.is_file():
        raise ConfigurationError(f"Mroz CSV not found: {path}")
    frame = pd.read_csv(path)
    if "exper2" not in frame.columns:
        frame["exper2"] = frame["expersq"] if "expersq" in frame.columns else frame["exper"] ** 2
    frame["const"] = 1.0
    columns = [OUTCOME, *REGRESSORS]
    missing = [name for name in columns if name not in frame.columns]
    if missing:
        raise ConfigurationError(f"Mroz CSV에 없는 열입니다: {missing}")
    frame = frame[columns]
    incomplete = frame.isna().any(axis=1)
    if incomplete.any():
        rows = frame.index[incomplete].tolist()[:5]
        raise ConfigurationError(f"Mroz CSV에 결측값이 있습니다: {int(incomplete.sum())}행 (예: {rows})")
    logger.info(f"Loaded Mroz data: {len(frame)} rows from {path}")
    return Dataset(rows=frame.to_numpy(dtype=float), columns=tuple(columns))


def reference_vector(table):
    return np.array([table[name] for name in REGRESSORS])
