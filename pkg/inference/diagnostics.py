import numpy as np

from objective.exceptions import ConfigurationError, InsufficientDrawsError


def gelman_rubin(chains):
    """같은 길이 체인 여러 개의 잠재 척도 축소 계수 R̂ (좌표별).

    Args:
        chains (Sequence[np.ndarray]): 각 B×d draw 행렬 (2개 이상).
    """
    stacked = np.stack([np.asarray(getattr(c, "draws", c), dtype=float) for c in chains])
    if stacked.ndim == 2:
        stacked = stacked[:, :, None]
    n_chains, length, _ = stacked.shape
    if n_chains < 2:
        raise ConfigurationError("Gelman-Rubin needs at least two chains.")
    if length < 2:
        raise InsufficientDrawsError("Gelman-Rubin needs at least two draws per chain.")
    chain_means = stacked.mean(axis=1)
    between = length * chain_means.var(axis=0, ddof=1)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    pooled = (length - 1) / length * within + between / length
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sqrt(pooled / within)


def batch_means_variance(draws):
    """배치 평균 추정 장기분산 (배치 수 ⌊√B⌋)."""
    draws = np.asarray(getattr(draws, "draws", draws), dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    total = draws.shape[0]
    n_batches = int(np.floor(np.sqrt(total)))
    if n_batches < 2:
        raise InsufficientDrawsError("Batch means need at least four draws.")
    size = total // n_batches
    means = draws[: n_batches * size].reshape(n_batches, size, -1).mean(axis=1)
    return size * means.var(axis=0, ddof=1), draws


def effective_sample_size(draws):
    """배치 평균 기반 유효 표본 크기 B·var(draws)/σ²_bm (좌표별)."""
    long_run, draws = batch_means_variance(draws)
    with np.errstate(invalid="ignore", divide="ignore"):
        return draws.shape[0] * draws.var(axis=0, ddof=1) / long_run


def monte_carlo_se(draws):
    """draw 평균의 몬테카를로 표준오차 √(σ²_bm / B)."""
    long_run, draws = batch_means_variance(draws)
    return np.sqrt(long_run / draws.shape[0])
