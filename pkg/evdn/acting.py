import numpy as np

from neural.network import QNetwork, forward
from world.observation import Observation
from world.state import Action


def select_actions(
    q_values: np.ndarray, epsilon: float, rng: np.random.Generator
) -> np.ndarray:
    """ε-greedy head selection for a batch

    Greedy ties go to the lowest head index.

    Args:
        q_values (np.ndarray): (B, 10) action values
        epsilon (float): Exploration probability
        rng (np.random.Generator): Acting RNG

    Raises:
        ValueError: ε outside [0, 1]

    Returns:
        np.ndarray: (B,) head indices
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"ε must be in [0, 1]. epsilon={epsilon}")
    count = q_values.shape[0]
    explore = rng.random(count) < epsilon
    random_heads = rng.integers(0, Action.COUNT, size=count)
    greedy_heads = np.argmax(q_values, axis=1) if count > 0 else np.zeros(0, dtype=np.int64)
    return np.where(explore, random_heads, greedy_heads)


def act(
    net: QNetwork, observation: Observation, epsilon: float, rng: np.random.Generator
) -> Action:
    """ε-greedy action of one agent

    Consumes the RNG exactly like a one-row `select_actions`.
    """
    q_values = forward(net, observation)[None, :]
    return Action.from_index(int(select_actions(q_values, epsilon, rng)[0]))
