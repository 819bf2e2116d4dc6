from dataclasses import dataclass
from enum import Enum
from logging import getLogger

import numpy as np

from .network import GradientBatch, QNetwork

__logger = getLogger(__name__)


class OptimizerKind(Enum):
    """Optimizer Kind"""

    SGD = "sgd"
    ADAM = "adam"

    def id(self) -> int:
        return {OptimizerKind.SGD: 1, OptimizerKind.ADAM: 2}[self]


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer Configuration"""

    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError(f"`learning_rate` must be positive. learning_rate={self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError(f"Adam betas must be in [0, 1). beta1={self.beta1} beta2={self.beta2}")


@dataclass
class OptimizerState:
    """Optimizer State

    Adam moments are None until the first Adam update.
    """

    step: int = 0
    first_moment: np.ndarray | None = None
    second_moment: np.ndarray | None = None


def apply_update(
    net: QNetwork,
    grads: GradientBatch,
    config: OptimizerConfig,
    state: OptimizerState,
) -> tuple[QNetwork, OptimizerState]:
    """Apply one first-order update

    Args:
        net (QNetwork): Network
        grads (GradientBatch): Gradient of the loss
        config (OptimizerConfig): Optimizer configuration
        state (OptimizerState): Optimizer state

    Raises:
        ValueError: Gradient shape does not match the network
        FloatingPointError: Non-finite gradient

    Returns:
        tuple[QNetwork, OptimizerState]: New network and advanced optimizer state
    """
    gradient = grads.gradient
    if gradient.shape != net.parameters.shape:
        raise ValueError(
            f"Gradient shape does not match the network. gradient={gradient.shape} "
            f"parameters={net.parameters.shape}"
        )
    if not np.all(np.isfinite(gradient)):
        __logger.error(f"Non-finite gradient. step={state.step}")
        raise FloatingPointError(f"Non-finite gradient. step={state.step}")

    step = state.step + 1
    match config.kind:
        case OptimizerKind.SGD:
            parameters = net.parameters - config.learning_rate * gradient
            new_state = OptimizerState(step)
        case OptimizerKind.ADAM:
            first = np.zeros_like(gradient) if state.first_moment is None else state.first_moment
            second = np.zeros_like(gradient) if state.second_moment is None else state.second_moment
            first = config.beta1 * first + (1.0 - config.beta1) * gradient
            second = config.beta2 * second + (1.0 - config.beta2) * gradient**2
            first_hat = first / (1.0 - config.beta1**step)
            second_hat = second / (1.0 - config.beta2**step)
            parameters = net.parameters - config.learning_rate * first_hat / (
                np.sqrt(second_hat) + config.eps
            )
            new_state = OptimizerState(step, first, second)
        case _:
            raise ValueError(f"Unknown optimizer. kind={config.kind}")

    return net.with_parameters(parameters, net.step + 1), new_state
