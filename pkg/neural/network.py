from dataclasses import dataclass
from typing import Self

import numpy as np

from world.observation import CHANNEL_COUNT, CROP_SIZE, SCALAR_COUNT, Observation
from world.state import Action
from .spec import CONV_KERNEL, CONV_OUTPUT, Architecture, NetworkSpec


@dataclass
class GradientBatch:
    """Accumulated parameter gradient"""

    gradient: np.ndarray
    sample_count: int

    def __add__(self, other: "GradientBatch") -> "GradientBatch":
        if self.gradient.shape != other.gradient.shape:
            raise ValueError("Gradient shapes differ.")
        return GradientBatch(
            self.gradient + other.gradient, self.sample_count + other.sample_count
        )

    def scaled(self, factor: float) -> "GradientBatch":
        return GradientBatch(self.gradient * factor, self.sample_count)


@dataclass
class _ForwardCache:
    patches: np.ndarray | None
    conv_pre: np.ndarray | None
    inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]


def _relu(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, 0.0)


def _conv_patches(local: np.ndarray) -> np.ndarray:
    """(B, 5, 5, C) crops to (B, 9, 54) 3x3 patches, (row, column, channel) order"""
    count = local.shape[0]
    return np.stack(
        [
            local[:, i : i + CONV_KERNEL, j : j + CONV_KERNEL, :].reshape(count, -1)
            for i in range(CONV_OUTPUT)
            for j in range(CONV_OUTPUT)
        ],
        axis=1,
    )


class QNetwork:
    """Action-value network with 10 output heads

    Parameters live in one flat float64 vector; layers are views into it.
    A network is never mutated: updates publish a new instance.
    """

    def __init__(self, spec: NetworkSpec, parameters: np.ndarray, seed: int = 0, step: int = 0):
        spec.validate()
        parameters = np.array(parameters, dtype=np.float64)
        if parameters.shape != (spec.parameter_count(),):
            raise ValueError(
                f"Parameter vector does not match the architecture. "
                f"expected={spec.parameter_count()} actual={parameters.shape}"
            )
        parameters.setflags(write=False)
        self.spec = spec
        self.parameters = parameters
        self.seed = seed
        self.step = step
        self.__layers = self.__views(parameters)

    @classmethod
    def create(cls, spec: NetworkSpec, seed: int) -> Self:
        """New network with uniform fan-in weights and zero biases

        Args:
            spec (NetworkSpec): Network specification
            seed (int): Initialisation seed

        Returns:
            Self: Instance of this class
        """
        rng = np.random.default_rng(seed)
        chunks: list[np.ndarray] = []
        for _, (fan_in, fan_out) in spec.layer_shapes():
            bound = 1.0 / np.sqrt(fan_in)
            chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return cls(spec, np.concatenate(chunks), seed, 0)

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> Self:
        return cls(spec, np.zeros(spec.parameter_count()))

    def with_parameters(self, parameters: np.ndarray, step: int | None = None) -> "QNetwork":
        return QNetwork(self.spec, parameters, self.seed, self.step if step is None else step)

    def parameter_count(self) -> int:
        return self.parameters.shape[0]

    def __views(self, parameters: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        layers: list[tuple[np.ndarray, np.ndarray]] = []
        offset = 0
        for _, (fan_in, fan_out) in self.spec.layer_shapes():
            weights = parameters[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            biases = parameters[offset : offset + fan_out]
            offset += fan_out
            layers.append((weights, biases))
        return layers

    @staticmethod
    def __check_inputs(local: np.ndarray, scalars: np.ndarray) -> None:
        if local.ndim != 4 or local.shape[1:] != (CROP_SIZE, CROP_SIZE, CHANNEL_COUNT):
            raise ValueError(f"Local observation shape mismatch. shape={local.shape}")
        if scalars.ndim != 2 or scalars.shape != (local.shape[0], SCALAR_COUNT):
            raise ValueError(f"Scalar observation shape mismatch. shape={scalars.shape}")

    def __forward(self, local: np.ndarray, scalars: np.ndarray) -> tuple[np.ndarray, _ForwardCache]:
        QNetwork.__check_inputs(local, scalars)
        count = local.shape[0]
        layers = self.__layers
        patches = None
        conv_pre = None
        if self.spec.architecture is Architecture.SMALL_CONV:
            weights, biases = layers[0]
            patches = _conv_patches(local)
            conv_pre = patches @ weights + biases
            values = np.concatenate([_relu(conv_pre).reshape(count, -1), scalars], axis=1)
            dense_layers = layers[1:]
        else:
            values = np.concatenate([local.reshape(count, -1), scalars], axis=1)
            dense_layers = layers

        inputs: list[np.ndarray] = []
        pre_activations: list[np.ndarray] = []
        for index, (weights, biases) in enumerate(dense_layers):
            inputs.append(values)
            pre_activation = values @ weights + biases
            pre_activations.append(pre_activation)
            is_head = index == len(dense_layers) - 1
            values = pre_activation if is_head else _relu(pre_activation)
        return values, _ForwardCache(patches, conv_pre, inputs, pre_activations)

    def forward_batch(self, local: np.ndarray, scalars: np.ndarray) -> np.ndarray:
        """Action values of a batch

        Args:
            local (np.ndarray): (B, 5, 5, 6) crops
            scalars (np.ndarray): (B, 4) global scalars

        Raises:
            ValueError: Input shape mismatch

        Returns:
            np.ndarray: (B, 10) action values
        """
        values, _ = self.__forward(local, scalars)
        return values

    def backward_batch(
        self, local: np.ndarray, scalars: np.ndarray, output_gradients: np.ndarray
    ) -> GradientBatch:
        """Parameter gradient of a loss, given the loss gradient w.r.t. the outputs

        Args:
            local (np.ndarray): (B, 5, 5, 6) crops
            scalars (np.ndarray): (B, 4) global scalars
            output_gradients (np.ndarray): (B, 10) dLoss/dQ

        Returns:
            GradientBatch: Gradient summed over the batch
        """
        _, cache = self.__forward(local, scalars)
        count = local.shape[0]
        gradients: list[np.ndarray] = []
        has_conv = self.spec.architecture is Architecture.SMALL_CONV
        dense_layers = self.__layers[1:] if has_conv else self.__layers

        upstream = output_gradients
        for index in reversed(range(len(dense_layers))):
            weights, _ = dense_layers[index]
            if index != len(dense_layers) - 1:
                upstream = upstream * (cache.pre_activations[index] > 0.0)
            gradients.append(upstream.sum(axis=0))
            gradients.append((cache.inputs[index].T @ upstream).reshape(-1))
            upstream = upstream @ weights.T

        if has_conv:
            channels = self.spec.conv_channels
            conv_upstream = upstream[:, : CONV_OUTPUT * CONV_OUTPUT * channels]
            conv_upstream = conv_upstream.reshape(count, CONV_OUTPUT * CONV_OUTPUT, channels)
            conv_upstream = conv_upstream * (cache.conv_pre > 0.0)
            gradients.append(conv_upstream.sum(axis=(0, 1)))
            gradients.append(np.einsum("bpk,bpc->kc", cache.patches, conv_upstream).reshape(-1))

        gradients.reverse()
        return GradientBatch(np.concatenate(gradients), count)


def _batch_of(observation: Observation) -> tuple[np.ndarray, np.ndarray]:
    return observation.local[None, ...], observation.scalars[None, ...]


def forward(net: QNetwork, observation: Observation) -> np.ndarray:
    """Action values of one observation

    Args:
        net (QNetwork): Network
        observation (Observation): Observation

    Raises:
        ValueError: Observation shape does not match the network input

    Returns:
        np.ndarray: 10 action values
    """
    local, scalars = _batch_of(observation)
    return net.forward_batch(local, scalars)[0]


def backward(
    net: QNetwork, observation: Observation, action_index: int, residual: float
) -> GradientBatch:
    """Gradient of the squared residual (y - Q(o, a))^2 for one head

    Args:
        net (QNetwork): Network
        observation (Observation): Observation
        action_index (int): Selected head
        residual (float): y - Q(o, a)

    Raises:
        ValueError: Invalid action index

    Returns:
        GradientBatch: Gradient
    """
    if not 0 <= action_index < Action.COUNT:
        raise ValueError(f"Action index out of range. action_index={action_index}")
    local, scalars = _batch_of(observation)
    output_gradients = np.zeros((1, Action.COUNT))
    output_gradients[0, action_index] = -2.0 * residual
    return net.backward_batch(local, scalars, output_gradients)
