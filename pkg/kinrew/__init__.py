from .kinship import kinship, kinship_to_population, family_census, founder_family_sizes
from .rewards import (
    RewardConfig,
    RewardKind,
    carrying_capacity,
    evolutionary_reward,
    sugary_reward,
    sugary_rewards,
)
from .horizon import effective_horizon, truncation_bound
from .oracle import Policy, constant_policy, oracle_record, terminal_reward_oracle
