import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

DRAW_COLUMNS = ("b", "phase")


def theta_columns(dim):
    return [f"theta_{j + 1}" for j in range(dim)]


def chain_frame(chain, method=None):
    """draws.csv 스키마 (b, phase, theta_1..theta_d) 의 DataFrame.

    번인 draw 와 유지 draw 모두 1부터 번호를 붙입니다. method 를 주면
    method 열을 추가합니다 (비교 실행에서 출처 구분).
    """
    frames = []
    for phase, block in (("burn", chain.burned), ("keep", chain.draws)):
        frame = pd.DataFrame(np.asarray(block), columns=theta_columns(chain.dim))
        frame.insert(0, "phase", phase)
        frame.insert(0, "b", np.arange(1, len(block) + 1))
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True)
    if method is not None:
        frame["method"] = method
    return frame


def draws_frame(draws, method=None):
    """번인이 없는 draw 행렬 (bootstrap, MALA 등) 을 같은 스키마로 변환합니다."""
    draws = np.asarray(draws)
    frame = pd.DataFrame(draws, columns=theta_columns(draws.shape[1]))
    frame.insert(0, "phase", "keep")
    frame.insert(0, "b", np.arange(1, len(draws) + 1))
    if method is not None:
        frame["method"] = method
    return frame


def write_draws_csv(chain, path):
    path = Path(path)
    chain_frame(chain).to_csv(path, index=False, float_format="%.17g")
    logger.debug(f"Wrote {path}")
    return path


def write_failure_log(entries, path):
    """안전장치 이벤트를 JSON lines (b, event, detail) 로 기록합니다."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(entry, ensure_ascii=False, sort_keys=True, default=float) + "\n")
    return path
