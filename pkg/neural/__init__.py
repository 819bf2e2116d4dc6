from .spec import Architecture, NetworkSpec
from .network import GradientBatch, QNetwork, forward, backward
from .optimizer import OptimizerConfig, OptimizerKind, OptimizerState, apply_update
from .checkpoint import NetworkCheckpoint
