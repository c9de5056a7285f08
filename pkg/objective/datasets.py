import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """관측치 z_i = (y_i, x_i) 를 행으로 갖는 불변 데이터셋.

    Attributes:
        rows (np.ndarray): (n, width) 행렬. 0번째 열이 결과변수 y.
        cluster_ids (np.ndarray | None): 행별 정수 클러스터 라벨.
        panel_shape (tuple | None): 패널 데이터의 (n_units, T). 행은 unit, time 순 정렬.
        columns (tuple): 열 이름 (CSV 내보내기용).
        truth (np.ndarray | None): 시뮬레이션 데이터의 참 모수.
    """

    rows: np.ndarray
    cluster_ids: np.ndarray | None = None
    panel_shape: tuple | None = None
    columns: tuple = ()
    truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ConfigurationError("Dataset needs at least one row of fixed width.")
        if not np.all(np.isfinite(rows)):
            raise ConfigurationError("결측치 또는 비유한 값이 포함된 데이터셋입니다.")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

        if self.cluster_ids is not None:
            cluster_ids = np.asarray(self.cluster_ids).astype(np.int64)
            if cluster_ids.shape != (rows.shape[0],):
                raise ConfigurationError("cluster_ids length must equal n.")
            cluster_ids.setflags(write=False)
            object.__setattr__(self, "cluster_ids", cluster_ids)

        if self.panel_shape is not None:
            n_units, periods = (int(v) for v in self.panel_shape)
            if n_units * periods != rows.shape[0]:
                raise ConfigurationError(
                    f"panel_shape {self.panel_shape} does not match n = {rows.shape[0]}."
                )
            object.__setattr__(self, "panel_shape", (n_units, periods))

        if not self.columns:
            names = ("y",) + tuple(f"x{j}" for j in range(1, rows.shape[1]))
            object.__setattr__(self, "columns", names)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def width(self):
        return self.rows.shape[1]

    @property
    def y(self):
        return self.rows[:, 0]

    @property
    def x(self):
        return self.rows[:, 1:]

    @property
    def regressor_names(self):
        return tuple(self.columns[1:])

    def cluster_index(self):
        """클러스터 라벨을 0..G-1 코드로 변환하여 (라벨, 코드) 를 반환합니다."""
        if self.cluster_ids is None:
            raise ConfigurationError("cluster_ids are required for clustered operations.")
        return np.unique(self.cluster_ids, return_inverse=True)

    def with_rows(self, rows):
        return replace(self, rows=rows)

    def time_split(self):
        """패널을 시간축으로 절반씩 나눈 두 데이터셋을 반환합니다.

        T 가 홀수이면 앞쪽은 floor(T/2), 뒤쪽은 T - floor(T/2) 기간을 갖습니다.

        Returns:
            tuple[Dataset, Dataset]: (앞쪽 절반, 뒤쪽 절반)

        Raises:
            ConfigurationError: panel_shape 가 없는 경우.
        """
        if self.panel_shape is None:
            raise ConfigurationError("Split-panel estimation needs panel_shape.")
        n_units, periods = self.panel_shape
        first = periods // 2
        if first < 1:
            raise ConfigurationError("Split-panel estimation needs T >= 2.")
        cube = self.rows.reshape(n_units, periods, self.width)
        units = np.repeat(np.arange(n_units), periods).reshape(n_units, periods)
        if self.cluster_ids is not None:
            units = self.cluster_ids.reshape(n_units, periods)

        halves = []
        for lo, hi in ((0, first), (first, periods)):
            halves.append(
                Dataset(
                    rows=cube[:, lo:hi, :].reshape(-1, self.width),
                    cluster_ids=units[:, lo:hi].ravel(),
                    panel_shape=(n_units, hi - lo),
                    columns=self.columns,
                    truth=self.truth,
                )
            )
        return tuple(halves)

    def to_frame(self):
        frame = pd.DataFrame(np.asarray(self.rows), columns=list(self.columns))
        if self.cluster_ids is not None:
            frame["cluster"] = self.cluster_ids
        if self.panel_shape is not None:
            n_units, periods = self.panel_shape
            frame["unit"] = np.repeat(np.arange(n_units), periods)
            frame["time"] = np.tile(np.arange(periods), n_units)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path


def read_csv(
    path,
    outcome,
    regressors,
    cluster=None,
    unit=None,
    time=None,
    add_constant=False,
):
    """CSV 파일을 읽어 Dataset 을 생성합니다.

    첫 행은 헤더여야 하며 결측치가 있으면 거부합니다. unit/time 열이 주어지면
    (unit, time) 순으로 정렬한 균형 패널로 취급하고 unit 을 클러스터로 사용합니다.

    Args:
        path: CSV 파일 경로.
        outcome (str): 결과변수 열 이름.
        regressors (list[str]): 설명변수 열 이름 목록.
        cluster (str | None): 클러스터 열 이름.
        unit (str | None): 패널 unit 열 이름.
        time (str | None): 패널 time 열 이름.
        add_constant (bool): 상수항 열 "const" 추가 여부.

    Returns:
        Dataset: 생성된 데이터셋.

    Raises:
        ConfigurationError: 열이 없거나 결측치가 있거나 패널이 불균형인 경우.
    """
    if not Path(path).is_file():
        raise ConfigurationError(f"CSV 파일을 찾을 수 없습니다: {path}")
    frame = pd.read_csv(path)
    wanted = [outcome, *regressors]
    for extra in (cluster, unit, time):
        if extra:
            wanted.append(extra)
    missing = [name for name in wanted if name not in frame.columns]
    if missing:
        raise ConfigurationError(f"CSV에 없는 열입니다: {missing}")
    if frame[wanted].isna().any().any():
        raise ConfigurationError("Missing values are not allowed in the input CSV.")

    panel_shape = None
    cluster_ids = None
    if unit or time:
        if not (unit and time):
            raise ConfigurationError("Panel data needs both unit and time columns.")
        frame = frame.sort_values([unit, time], kind="mergesort").reset_index(drop=True)
        counts = frame.groupby(unit, sort=False).size()
        if counts.nunique() != 1:
            raise ConfigurationError("Only balanced panels are supported.")
        panel_shape = (len(counts), int(counts.iloc[0]))
        cluster_ids = pd.factorize(frame[unit])[0]
    if cluster:
        cluster_ids = pd.factorize(frame[cluster])[0]

    values = frame[[outcome, *regressors]].to_numpy(dtype=float)
    columns = (outcome, *regressors)
    if add_constant:
        values = np.column_stack([values, np.ones(len(values))])
        columns = (*columns, "const")

    logger.info(f"Loaded {len(values)} rows from {path}")
    return Dataset(
        rows=values,
        cluster_ids=cluster_ids,
        panel_shape=panel_shape,
        columns=columns,
    )
