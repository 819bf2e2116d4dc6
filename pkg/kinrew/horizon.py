import math

from .rewards import RewardConfig


def truncation_bound(config: RewardConfig, horizon: int) -> float:
    """Worst-case error of a terminal sum truncated after `horizon` ticks

    Args:
        config (RewardConfig): Reward configuration with a carrying capacity
        horizon (int): Number of summed ticks

    Returns:
        float: r_b * gamma^horizon / (1 - gamma)
    """
    if config.carrying_capacity is None:
        raise ValueError("Carrying capacity must be resolved first.")
    return config.carrying_capacity * config.gamma**horizon / (1.0 - config.gamma)


def effective_horizon(config: RewardConfig) -> int:
    """Effective horizon h_e

    Smallest positive number of ticks after which the truncated terminal sum
    is within epsilon of the infinite sum for any rollout whose per-tick
    kinship sum stays below the carrying capacity.

    Args:
        config (RewardConfig): Reward configuration with a carrying capacity

    Raises:
        ValueError: Carrying capacity unresolved
        ValueError: epsilon * (1 - gamma) / r_b must be below 1

    Returns:
        int: h_e = ceil(log(epsilon * (1 - gamma) / r_b) / log(gamma))
    """
    config.validate()
    if config.carrying_capacity is None:
        raise ValueError("Carrying capacity must be resolved first.")
    ratio = config.epsilon * (1.0 - config.gamma) / config.carrying_capacity
    if ratio >= 1.0:
        raise ValueError(
            f"epsilon * (1 - gamma) / r_b must be below 1. ratio={ratio}"
        )
    if config.gamma == 0.0:
        return 1

    horizon = max(1, math.ceil(math.log(ratio) / math.log(config.gamma)))
    # Rounding in the logarithms can land one tick off either way
    while truncation_bound(config, horizon) > config.epsilon:
        horizon += 1
    while horizon > 1 and truncation_bound(config, horizon - 1) <= config.epsilon:
        horizon -= 1
    return horizon
