from logging import getLogger
from typing import Mapping

import numpy as np

from .config import ReproductionMode, WorldConfig
from .genome import Genome
from .state import (
    MOVE_OFFSETS,
    Action,
    AgentState,
    AttackEvent,
    BirthEvent,
    DeathCause,
    DeathEvent,
    HarvestEvent,
    Move,
    TickEvents,
    WorldState,
)

__logger = getLogger(__name__)


def init_world(config: WorldConfig) -> WorldState:
    """Initialise a world with its founders

    Founders are placed on uniformly random distinct tiles. Founder `f` carries
    a genome whose alleles are all `f`, so founders are mutually unrelated.

    Args:
        config (WorldConfig): World configuration

    Raises:
        ValueError: Invalid configuration or world too small for the founders

    Returns:
        WorldState: Initial state
    """
    state = WorldState.empty(config)
    tiles = state.rng.choice(
        config.width * config.height, size=config.founder_count, replace=False
    )
    for founder, tile in enumerate(tiles):
        position = (int(tile) % config.width, int(tile) // config.width)
        state.place_agent(
            position,
            Genome.founder(founder, config.genome_length),
            policy_slot=founder,
        )
    __logger.debug(
        f"World initialised. seed={config.seed} founders={config.founder_count} "
        f"sources={int(state.source.sum())}"
    )
    return state


def __validate_actions(state: WorldState, actions: Mapping[int, Action]) -> None:
    for agent_id in actions:
        if agent_id not in state.agents:
            raise ValueError(
                f"Action given for a dead or unknown agent. agent_id={agent_id}"
            )
    for agent_id in state.agents:
        if agent_id not in actions:
            raise ValueError(f"No action given for a living agent. agent_id={agent_id}")


def __kill(
    state: WorldState, agent: AgentState, cause: DeathCause, events: TickEvents
) -> None:
    state.remove_agent(agent.id)
    events.events.append(
        DeathEvent(
            state.tick,
            agent.id,
            cause,
            agent.age,
            agent.food_stored,
            agent.position,
            agent.genome,
        )
    )


def __is_attack_blocked(
    config: WorldConfig, attacker: AgentState, victim: AgentState
) -> bool:
    family = config.blocked_attack_family
    if family is None:
        return False
    if attacker.genome != victim.genome:
        return False
    return all(allele == family for allele in attacker.genome.alleles)


def try_reproduce(
    state: WorldState,
    agent_id: int,
    events: TickEvents | None = None,
    newborn: set[int] | None = None,
    mated: set[int] | None = None,
) -> AgentState | None:
    """Give birth if the agent is fertile and has room

    Asexual: fertile when food_stored > 2e inside the fertility window, the
    parent hands e food to a clone on a random empty adjacent tile.
    Sexual: fertile when food_stored > e inside the window; a random adjacent
    fertile mate is chosen, then a random empty tile adjacent to either parent.
    Each parent hands e/2 food and the child takes a random half of its genes
    from each parent. An agent takes part in at most one birth per tick.

    Args:
        state (WorldState): World state
        agent_id (int): Agent id
        events (TickEvents | None, optional): Tick events to append to
        newborn (set[int] | None, optional): Ids born this tick
        mated (set[int] | None, optional): Ids that already gave birth this tick

    Returns:
        AgentState | None: Child if born, else None
    """
    config = state.config
    events = TickEvents(state.tick) if events is None else events
    newborn = set() if newborn is None else newborn
    mated = set() if mated is None else mated

    if agent_id in mated or agent_id in newborn:
        return None
    agent = state.agents[agent_id]
    if not agent.is_fertile(config):
        return None

    if config.reproduction_mode is ReproductionMode.ASEXUAL:
        empty_tiles = state.empty_neighbors(agent.position)
        if len(empty_tiles) == 0:
            return None
        tile = empty_tiles[int(state.rng.integers(len(empty_tiles)))]
        agent.food_stored -= config.endowment
        child = state.place_agent(
            tile,
            agent.genome,
            food_stored=config.endowment,
            policy_slot=agent.policy_slot,
        )
        parent_ids: tuple[int, ...] = (agent.id,)
    else:
        mates: list[AgentState] = []
        for neighbor in state.neighbors(agent.position):
            candidate = state.agent_at(neighbor)
            if candidate is None:
                continue
            if candidate.id in mated or candidate.id in newborn:
                continue
            if candidate.is_fertile(config):
                mates.append(candidate)
        if len(mates) == 0:
            return None
        mate = mates[int(state.rng.integers(len(mates)))]

        empty_tiles = state.empty_neighbors(agent.position)
        for tile in state.empty_neighbors(mate.position):
            if tile not in empty_tiles:
                empty_tiles.append(tile)
        if len(empty_tiles) == 0:
            return None
        tile = empty_tiles[int(state.rng.integers(len(empty_tiles)))]

        genome = agent.genome.recombine(mate.genome, state.rng)
        agent.food_stored -= config.endowment / 2
        mate.food_stored -= config.endowment / 2
        child = state.place_agent(
            tile,
            genome,
            food_stored=config.endowment,
            policy_slot=agent.policy_slot,
        )
        parent_ids = (agent.id, mate.id)
        mated.add(mate.id)

    mated.add(agent.id)
    newborn.add(child.id)
    events.events.append(
        BirthEvent(state.tick, child.id, parent_ids, child.position, child.genome)
    )
    return child


def resolve_attack(
    state: WorldState,
    attacker_id: int,
    events: TickEvents | None = None,
    newborn: set[int] | None = None,
) -> TickEvents:
    """Attack a uniformly random adjacent agent

    The victim loses 1 health. A victim reaching 0 health dies and the attacker
    takes half of its food; the other half is destroyed. Agents born this tick
    are not attackable. No adjacent agent is a silent no-op.

    Args:
        state (WorldState): World state
        attacker_id (int): Attacker id
        events (TickEvents | None, optional): Tick events to append to
        newborn (set[int] | None, optional): Ids born this tick

    Returns:
        TickEvents: Tick events
    """
    events = TickEvents(state.tick) if events is None else events
    newborn = set() if newborn is None else newborn

    attacker = state.agents.get(attacker_id)
    if attacker is None:
        # Killed earlier in the attack phase
        return events

    candidates: list[AgentState] = []
    for neighbor in state.neighbors(attacker.position):
        candidate = state.agent_at(neighbor)
        if candidate is not None and candidate.id not in newborn:
            candidates.append(candidate)
    if len(candidates) == 0:
        return events
    victim = candidates[int(state.rng.integers(len(candidates)))]

    if __is_attack_blocked(state.config, attacker, victim):
        return events

    victim.health -= 1
    killed = victim.health <= 0
    food_gained = 0.0
    if killed:
        food_gained = 0.5 * victim.food_stored
        attacker.food_stored += food_gained
        events.food_destroyed += victim.food_stored - food_gained
    events.events.append(
        AttackEvent(
            state.tick,
            attacker.id,
            victim.id,
            attacker.age,
            victim.age,
            attacker.genome,
            victim.genome,
            killed,
            food_gained,
        )
    )
    if killed:
        __kill(state, victim, DeathCause.ATTACK, events)
    return events


def __act(
    state: WorldState,
    agent: AgentState,
    action: Action,
    events: TickEvents,
    newborn: set[int],
    mated: set[int],
) -> None:
    config = state.config

    # Move
    if action.move is not Move.STAY:
        dx, dy = MOVE_OFFSETS[action.move]
        target = state.wrap(agent.position[0] + dx, agent.position[1] + dy)
        if not state.is_occupied(target):
            state.move_agent(agent.id, target)

    # Harvest
    x, y = agent.position
    amount = float(state.food[y, x])
    if amount > 0.0:
        agent.food_stored += amount
        state.food[y, x] = 0.0
        events.harvests[agent.id] = events.harvests.get(agent.id, 0.0) + amount
        events.events.append(HarvestEvent(state.tick, agent.id, amount))

    try_reproduce(state, agent.id, events, newborn, mated)

    # Eat
    eaten = min(1.0, agent.food_stored)
    agent.food_stored -= eaten
    events.food_eaten += eaten

    agent.age += 1

    if agent.food_stored <= 0.0:
        events.food_destroyed += max(agent.food_stored, 0.0)
        __kill(state, agent, DeathCause.STARVATION, events)
    elif agent.age > config.longevity:
        events.food_destroyed += agent.food_stored
        __kill(state, agent, DeathCause.AGE, events)


def __grow_food(state: WorldState, events: TickEvents) -> None:
    config = state.config
    before = state.food[state.source]
    after = np.minimum(before + config.food_growth_rate, config.food_capacity)
    events.food_grown = float((after - before).sum())
    state.food[state.source] = after


def step(
    state: WorldState, actions: Mapping[int, Action]
) -> tuple[WorldState, TickEvents]:
    """Advance the world by one tick (in place)

    Living agents act in a freshly shuffled order: move, harvest, reproduce,
    eat, age, die. Attacks follow in the same order once everyone has moved,
    then every food source grows.

    Args:
        state (WorldState): World state, mutated
        actions (Mapping[int, Action]): Action of every living agent

    Raises:
        ValueError: Action for a dead or unknown agent, or a living agent without one

    Returns:
        tuple[WorldState, TickEvents]: The advanced state and this tick's events
    """
    __validate_actions(state, actions)

    events = TickEvents(state.tick)
    agent_ids = state.living_ids()
    order = [agent_ids[index] for index in state.rng.permutation(len(agent_ids))]
    newborn: set[int] = set()
    mated: set[int] = set()

    for agent_id in order:
        agent = state.agents.get(agent_id)
        if agent is None:
            continue
        __act(state, agent, actions[agent_id], events, newborn, mated)

    for agent_id in order:
        if actions[agent_id].attack:
            resolve_attack(state, agent_id, events, newborn)

    __grow_food(state, events)

    state.event_log = events.events
    state.tick += 1
    return state, events
