import enum
from dataclasses import dataclass

import numpy as np

from objective.exceptions import ConfigurationError

MAX_SEED = 2**64


class Purpose(enum.IntEnum):
    """하위 스트림을 구분하는 용도 태그 (spawn_key 의 마지막 원소)."""

    PLAN = 0
    DIRECTION = 1
    SECANT_INIT = 2
    MALA = 3
    NOISE = 4
    REPLICATION = 5
    DATA = 6


@dataclass(frozen=True)
class RngStream:
    """(seed, 경로, 반복 번호, 용도) 로 결정되는 카운터 기반 난수 스트림.

    각 하위 스트림은 SeedSequence(entropy=seed, spawn_key=(*path, iteration, purpose))
    로 초기화한 Philox 생성기입니다. 같은 키는 실행 순서나 worker 수와 무관하게
    같은 난수열을 내므로 외부에서도 계획을 재생성할 수 있습니다.

    Attributes:
        seed (int): 64-bit 부호 없는 정수 시드.
        path (tuple[int, ...]): 체인/반복실험을 구분하는 상위 키.
    """

    seed: int
    path: tuple = ()

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < MAX_SEED:
            raise ConfigurationError(f"Seed must be a 64-bit unsigned integer, got {self.seed}.")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "path", tuple(int(k) for k in self.path))

    def child(self, *keys):
        return RngStream(self.seed, self.path + tuple(int(k) for k in keys))

    def seed_sequence(self, iteration, purpose):
        key = (*self.path, int(iteration), int(purpose))
        return np.random.SeedSequence(entropy=self.seed, spawn_key=key)

    def generator(self, iteration, purpose):
        return np.random.Generator(np.random.Philox(self.seed_sequence(iteration, purpose)))
