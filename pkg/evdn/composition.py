"""Kinship-weighted value composition

Agent i's joint value is the kinship-weighted mean of the individual values
of every living agent j:

    Q^i = (1 / n^i) * sum_j k(g^i, g^j) * Q~^j,    n^i = sum_j k(g^i, g^j)

The batched functions take a kinship matrix whose rows are the agents the
values are composed for and whose columns are the agents contributing values.
"""

import numpy as np


def joint_q(values: np.ndarray, kinships: np.ndarray) -> float:
    """Joint action value of one agent

    Args:
        values (np.ndarray): Individual values Q~^j of the living agents
        kinships (np.ndarray): k(g^i, g^j), aligned with `values`

    Raises:
        ValueError: Empty census or shape mismatch

    Returns:
        float: Kinship-weighted mean of `values`
    """
    values = np.asarray(values, dtype=np.float64)
    kinships = np.asarray(kinships, dtype=np.float64)
    if values.shape != kinships.shape:
        raise ValueError(
            f"Values and kinships are not aligned. values={values.shape} kinships={kinships.shape}"
        )
    census = kinships.sum()
    if census <= 0.0:
        raise ValueError(f"Joint value of an empty census. census={census}")
    return float(kinships @ values / census)


def joint_q_batch(kinships: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Joint values of every row agent

    Raises:
        ValueError: A row has an empty census
    """
    census = kinships.sum(axis=1)
    if np.any(census <= 0.0):
        raise ValueError("Joint value of an empty census.")
    return kinships @ values / census


def terminal_estimate(greedy_values: np.ndarray, kinships: np.ndarray) -> float:
    """Bootstrapped terminal reward of an agent that died this tick

    Args:
        greedy_values (np.ndarray): max_a Q~^j of the survivors' next observations
        kinships (np.ndarray): k(g^i, g^j) with every survivor, the dead agent excluded

    Returns:
        float: Kinship-weighted mean of the survivors' greedy values, 0 without surviving kin
    """
    greedy_values = np.asarray(greedy_values, dtype=np.float64)
    kinships = np.asarray(kinships, dtype=np.float64)
    census = kinships.sum()
    if census <= 0.0:
        return 0.0
    return float(kinships @ greedy_values / census)


def greedy_joint_values(kinships: np.ndarray, greedy_values: np.ndarray) -> np.ndarray:
    """Next-tick joint greedy value of every row agent, 0 for rows without living kin

    Args:
        kinships (np.ndarray): (n, m) kinship of the census at t with the census at t+1
        greedy_values (np.ndarray): (m,) max_a Q~^j at t+1

    Returns:
        np.ndarray: (n,) values
    """
    census = kinships.sum(axis=1)
    weighted = kinships @ greedy_values if greedy_values.shape[0] > 0 else np.zeros(len(census))
    return np.divide(weighted, census, out=np.zeros(len(census)), where=census > 0.0)


def learning_targets(
    rewards: np.ndarray, gamma: float, next_values: np.ndarray, alive: np.ndarray
) -> np.ndarray:
    """y = r + γ * next value for survivors, the terminal estimate for the dead

    For a dead agent `next_values` holds its terminal estimate.
    """
    return np.where(alive, rewards + gamma * next_values, next_values)


def composed_output_gradients(
    kinships: np.ndarray, residuals: np.ndarray, experience_count: int
) -> np.ndarray:
    """dLoss/dQ~^j of the chosen heads for the loss (1/M) sum_i (y^i - Q^i)^2

    Agent j collects -2 * k(g^i, g^j) / n^i * residual^i from every agent i
    of the census, so unrelated agents receive nothing.

    Args:
        kinships (np.ndarray): (n, n) kinship matrix of the census
        residuals (np.ndarray): (n,) y^i - Q^i
        experience_count (int): M, experiences in the whole batch

    Returns:
        np.ndarray: (n,) output gradients
    """
    census = kinships.sum(axis=1)
    return -2.0 * (kinships.T @ (residuals / census)) / experience_count


def vdn_mean_output_gradients(residual: float, team_size: int) -> np.ndarray:
    """dLoss/dQ~^j of one team experience under VDN with a mean mixer

    Q_tot = (1/n) sum_j Q~^j and loss (y - Q_tot)^2.
    """
    return np.full(team_size, -2.0 * residual / team_size)
