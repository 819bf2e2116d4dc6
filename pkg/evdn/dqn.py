import numpy as np

from neural.network import QNetwork, backward, forward
from neural.optimizer import OptimizerConfig, OptimizerState, apply_update
from world.observation import Observation


def dqn_update(
    net: QNetwork,
    optimizer_state: OptimizerState,
    optimizer_config: OptimizerConfig,
    observation: Observation,
    action_index: int,
    reward: float,
    next_observation: Observation | None,
    gamma: float,
) -> tuple[QNetwork, OptimizerState, float]:
    """Single-agent Q-learning step without replay or target network

    Args:
        net (QNetwork): Network
        optimizer_state (OptimizerState): Optimizer state
        optimizer_config (OptimizerConfig): Optimizer configuration
        observation (Observation): o_t
        action_index (int): a_t
        reward (float): r_t, ignored when the episode ended in death
        next_observation (Observation | None): o_{t+1}, None after death
        gamma (float): Discount

    Returns:
        tuple[QNetwork, OptimizerState, float]: Updated network, optimizer state and residual
    """
    if next_observation is None:
        target = 0.0
    else:
        target = reward + gamma * float(np.max(forward(net, next_observation)))
    residual = target - float(forward(net, observation)[action_index])
    grads = backward(net, observation, action_index, residual)
    net, optimizer_state = apply_update(net, grads, optimizer_config, optimizer_state)
    return net, optimizer_state, residual
