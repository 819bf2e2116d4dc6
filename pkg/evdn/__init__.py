from .config import EpisodeSeeds, EpsilonSchedule, TrainerConfig, episode_seeds
from .composition import (
    composed_output_gradients,
    greedy_joint_values,
    joint_q,
    joint_q_batch,
    learning_targets,
    terminal_estimate,
    vdn_mean_output_gradients,
)
from .acting import act, select_actions
from .policy_pool import PolicyPool, network_slots
from .experience import Experience, ExperienceBatch, learning_target
from .dqn import dqn_update
from .trainer import (
    collect_environment,
    EnvironmentTick,
    EpochReport,
    EvdnTrainer,
    TrainingEnvironment,
    checkpoint_directory,
    latest_checkpoint,
)
