from dataclasses import replace
from io import BytesIO, StringIO
import unittest

import numpy as np

from world import (
    Action,
    DeathCause,
    FoodLayout,
    Genome,
    Move,
    ReproductionMode,
    TileKind,
    WorldConfig,
    WorldSnapshot,
    init_world,
    kinship_matrix,
    observe,
    observe_all,
    read_episode,
    render_pixmap,
    render_text,
    resolve_attack,
    step,
    try_reproduce,
)
from world.recording import EpisodeRecorder
from world.observation import KINSHIP_CHANNEL
from world.state import WorldState


def random_actions(state: WorldState, rng: np.random.Generator) -> dict[int, Action]:
    return {
        agent_id: Action.from_index(int(rng.integers(Action.COUNT)))
        for agent_id in state.living_ids()
    }


def empty_world(**overrides) -> WorldState:
    config = replace(
        WorldConfig(width=8, height=8, founder_count=1, food_layout=FoodLayout.parse("none")),
        **overrides,
    )
    return WorldState.empty(config)


class TestGenome(unittest.TestCase):
    KINSHIPS: list[tuple[tuple[int, ...], tuple[int, ...], float]] = [
        ((0,), (0,), 1.0),
        ((0,), (1,), 0.0),
        ((0, 0, 1, 1), (0, 1, 1, 1), 0.75),
        ((2, 2, 2, 2), (3, 3, 3, 3), 0.0),
    ]

    def test_kinship_matrix(self):
        for alleles_a, alleles_b, expected in TestGenome.KINSHIPS:
            with self.subTest(alleles_a=alleles_a, alleles_b=alleles_b):
                kinships = kinship_matrix(np.array([alleles_a]), np.array([alleles_b]))
                self.assertAlmostEqual(expected, float(kinships[0, 0]))

        with self.assertRaises(ValueError):
            kinship_matrix(np.array([[0, 0]]), np.array([[0, 0, 0]]))

    def test_recombine_takes_half_from_each_parent(self):
        rng = np.random.default_rng(3)
        parent_a = Genome.founder(0, 32)
        parent_b = Genome.founder(1, 32)
        for trial in range(20):
            with self.subTest(trial=trial):
                child = parent_a.recombine(parent_b, rng)
                self.assertEqual(16, child.alleles.count(0))
                self.assertEqual(16, child.alleles.count(1))

    def test_invalid_genome(self):
        with self.assertRaises(ValueError):
            Genome(())
        with self.assertRaises(ValueError):
            Genome((0, -1))


class TestWorld(unittest.TestCase):
    def assert_tiles(self, state: WorldState):
        occupied = {agent.position for agent in state.agents.values()}
        for y in range(state.config.height):
            for x in range(state.config.width):
                tile = state.tile(x, y)
                self.assertEqual((x, y) in occupied, tile.occupied)
                self.assertLessEqual(tile.food_available, state.config.food_capacity + 1e-12)
                if tile.kind == TileKind.DIRT:
                    self.assertEqual(0.0, tile.food_available)

    def test_init_world(self):
        state = init_world(WorldConfig())
        self.assertEqual(5, state.population())
        positions = {agent.position for agent in state.agents.values()}
        self.assertEqual(5, len(positions))
        for founder, agent in enumerate(state.agents.values()):
            with self.subTest(founder=founder):
                self.assertEqual(10.0, agent.food_stored)
                self.assertEqual(0, agent.age)
                self.assertEqual(2, agent.health)
                self.assertEqual(Genome((founder,)), agent.genome)
        sources = state.source
        np.testing.assert_array_equal(np.where(sources, 3.0, 0.0), state.food)
        self.assert_tiles(state)
        self.assertEqual(TileKind.FOOD_SOURCE, state.tile(*np.argwhere(sources)[0][::-1]).kind)

    def test_harvest_collects_all_food(self):
        state = empty_world(food_layout=FoodLayout.parse("tiles:3,2"))
        agent = state.place_agent((2, 2), Genome((0,)))
        state, events = step(state, {agent.id: Action(Move.EAST)})
        self.assertEqual((3, 2), agent.position)
        self.assertAlmostEqual(3.0, events.harvests[agent.id])
        # 10 + 3 harvested - 1 eaten
        self.assertAlmostEqual(12.0, agent.food_stored)
        self.assertAlmostEqual(0.15, float(state.food[2, 3]))

    def test_move_into_occupied_tile_stays(self):
        state = empty_world()
        mover = state.place_agent((1, 1), Genome((0,)))
        blocker = state.place_agent((2, 1), Genome((0,)))
        step(state, {mover.id: Action(Move.EAST), blocker.id: Action()})
        self.assertEqual((1, 1), mover.position)

    def test_moves_wrap_around(self):
        state = empty_world()
        agent = state.place_agent((0, 0), Genome((0,)))
        step(state, {agent.id: Action(Move.NORTH)})
        self.assertEqual((0, 7), agent.position)
        step(state, {agent.id: Action(Move.WEST)})
        self.assertEqual((7, 7), agent.position)

    def test_attack(self):
        state = empty_world()
        attacker = state.place_agent((1, 1), Genome((0,)), food_stored=5.0)
        victim = state.place_agent((2, 1), Genome((1,)), food_stored=8.0)
        resolve_attack(state, attacker.id)
        self.assertEqual(1, victim.health)
        self.assertIn(victim.id, state.agents)

        events = resolve_attack(state, attacker.id)
        self.assertNotIn(victim.id, state.agents)
        self.assertAlmostEqual(9.0, attacker.food_stored)
        self.assertAlmostEqual(4.0, events.food_destroyed)
        self.assertEqual(DeathCause.ATTACK, events.deaths[0].cause)

    def test_attack_without_neighbor_is_noop(self):
        state = empty_world()
        attacker = state.place_agent((1, 1), Genome((0,)))
        events = resolve_attack(state, attacker.id)
        self.assertEqual([], events.events)

    def test_blocked_attack_family(self):
        state = empty_world(blocked_attack_family=0)
        attacker = state.place_agent((1, 1), Genome((0,)))
        clone = state.place_agent((2, 1), Genome((0,)))
        resolve_attack(state, attacker.id)
        self.assertEqual(2, clone.health)

    ASEXUAL_FERTILITY: list[tuple[float, bool]] = [(20.0, False), (20.01, True)]

    def test_asexual_fertility_threshold(self):
        for food, fertile in TestWorld.ASEXUAL_FERTILITY:
            with self.subTest(food=food):
                state = empty_world()
                parent = state.place_agent((1, 1), Genome((0,)), food_stored=food, age=10)
                child = try_reproduce(state, parent.id)
                self.assertEqual(fertile, child is not None)
                if child is not None:
                    self.assertAlmostEqual(food - 10.0, parent.food_stored)
                    self.assertAlmostEqual(10.0, child.food_stored)
                    self.assertEqual(parent.genome, child.genome)
                    self.assertIn(child.position, state.neighbors(parent.position))

    def test_fertility_window(self):
        for age, fertile in [(4, False), (5, True), (40, True), (41, False)]:
            with self.subTest(age=age):
                state = empty_world()
                parent = state.place_agent((1, 1), Genome((0,)), food_stored=30.0, age=age)
                self.assertEqual(fertile, try_reproduce(state, parent.id) is not None)

    def test_sexual_reproduction(self):
        state = empty_world(
            reproduction_mode=ReproductionMode.SEXUAL, genome_length=32, founder_count=2
        )
        parent_a = state.place_agent((1, 1), Genome.founder(0, 32), food_stored=12.0, age=10)
        parent_b = state.place_agent((2, 1), Genome.founder(1, 32), food_stored=12.0, age=10)
        child = try_reproduce(state, parent_a.id)
        self.assertIsNotNone(child)
        self.assertAlmostEqual(7.0, parent_a.food_stored)
        self.assertAlmostEqual(7.0, parent_b.food_stored)
        self.assertEqual(16, child.genome.alleles.count(0))
        self.assertEqual(16, child.genome.alleles.count(1))

    def test_sexual_reproduction_needs_mate(self):
        state = empty_world(
            reproduction_mode=ReproductionMode.SEXUAL, genome_length=32, founder_count=2
        )
        parent = state.place_agent((1, 1), Genome.founder(0, 32), food_stored=30.0, age=10)
        self.assertIsNone(try_reproduce(state, parent.id))

    def test_starvation_and_old_age(self):
        state = empty_world()
        starving = state.place_agent((1, 1), Genome((0,)), food_stored=1.0)
        old = state.place_agent((4, 4), Genome((0,)), age=50)
        _, events = step(state, {starving.id: Action(), old.id: Action()})
        causes = {event.agent_id: event.cause for event in events.deaths}
        self.assertEqual(DeathCause.STARVATION, causes[starving.id])
        self.assertEqual(DeathCause.AGE, causes[old.id])
        self.assertEqual(0, state.population())

    def test_protocol_errors(self):
        state = empty_world()
        agent = state.place_agent((1, 1), Genome((0,)))
        with self.assertRaises(ValueError):
            step(state, {})
        with self.assertRaises(ValueError):
            step(state, {agent.id: Action(), 99: Action()})
        with self.assertRaises(ValueError):
            state.place_agent((1, 1), Genome((0,)))
        with self.assertRaises(ValueError):
            observe(state, 99)

    def test_invariants_under_random_actions(self):
        rng = np.random.default_rng(11)
        for mode, genome_length in [(ReproductionMode.ASEXUAL, 1), (ReproductionMode.SEXUAL, 32)]:
            with self.subTest(mode=mode):
                state = init_world(
                    WorldConfig(
                        width=12,
                        height=12,
                        reproduction_mode=mode,
                        genome_length=genome_length,
                        seed=5,
                    )
                )
                alleles = set(np.unique(state.allele_matrix()).tolist())
                for _ in range(300):
                    if state.population() == 0:
                        break
                    food_before = state.total_tile_food() + state.total_agent_food()
                    _, events = step(state, random_actions(state, rng))
                    food_after = state.total_tile_food() + state.total_agent_food()
                    self.assertAlmostEqual(
                        food_before + events.food_grown - events.food_eaten - events.food_destroyed,
                        food_after,
                        places=6,
                    )
                    occupied = np.argwhere(state.occupant >= 0)
                    self.assertEqual(state.population(), len(occupied))
                    for agent in state.agents.values():
                        x, y = agent.position
                        self.assertEqual(agent.id, state.occupant[y, x])
                    self.assert_tiles(state)
                    if state.population() > 0:
                        current = set(np.unique(state.allele_matrix()).tolist())
                        self.assertTrue(current <= alleles)
                        alleles = current

    def test_determinism(self):
        config = WorldConfig(width=12, height=12, seed=21)
        trajectories = []
        for _ in range(2):
            state = init_world(config)
            rng = np.random.default_rng(4)
            for _ in range(100):
                if state.population() == 0:
                    break
                step(state, random_actions(state, rng))
            trajectories.append(WorldSnapshot(state).to_bytes())
        self.assertEqual(trajectories[0], trajectories[1])


class TestObservation(unittest.TestCase):
    def test_observation_shape_and_kinship(self):
        state = empty_world(founder_count=2)
        agent = state.place_agent((3, 3), Genome((0,)))
        state.place_agent((4, 3), Genome((0,)))
        state.place_agent((3, 4), Genome((1,)))
        observation = observe(state, agent.id)
        self.assertEqual((5, 5, 6), observation.local.shape)
        self.assertEqual((4,), observation.scalars.shape)
        self.assertEqual(1.0, observation.local[2, 2, KINSHIP_CHANNEL])
        self.assertEqual(1.0, observation.local[2, 3, KINSHIP_CHANNEL])
        self.assertEqual(0.0, observation.local[3, 2, KINSHIP_CHANNEL])

    def test_mask_kinship(self):
        state = empty_world(mask_kinship=True)
        agent = state.place_agent((3, 3), Genome((0,)))
        state.place_agent((4, 3), Genome((0,)))
        batch = observe_all(state)
        self.assertTrue(np.all(batch.local[:, :, :, KINSHIP_CHANNEL] == 0.0))
        self.assertEqual(1.0, observe(state, agent.id).local[2, 2, 1])


class TestSnapshot(unittest.TestCase):
    def test_snapshot_preserves_future(self):
        state = init_world(WorldConfig(width=10, height=10, seed=8))
        rng = np.random.default_rng(2)
        for _ in range(10):
            step(state, random_actions(state, rng))

        stream = BytesIO()
        WorldSnapshot(state).write(stream)
        stream.seek(0)
        restored = WorldSnapshot.read(stream).state

        actions = {agent_id: Action(Move.EAST, True) for agent_id in state.living_ids()}
        step(state, actions)
        step(restored, actions)
        self.assertEqual(WorldSnapshot(state).to_bytes(), WorldSnapshot(restored).to_bytes())

    def test_corrupted_snapshot(self):
        payload = bytearray(WorldSnapshot(init_world(WorldConfig(width=6, height=6))).to_bytes())
        payload[10] ^= 0xFF
        with self.assertRaises(ValueError):
            WorldSnapshot.from_bytes(bytes(payload))
        with self.assertRaises(ValueError):
            WorldSnapshot.from_bytes(b"XXXX" + bytes(payload[4:]))


class TestRecording(unittest.TestCase):
    def test_record_and_render(self):
        config = WorldConfig(width=10, height=6, seed=3)
        state = init_world(config)
        stream = StringIO()
        recorder = EpisodeRecorder(stream, state, "hash")
        rng = np.random.default_rng(0)
        for _ in range(5):
            _, events = step(state, random_actions(state, rng))
            recorder.record(state, events)

        stream.seek(0)
        header, frames = read_episode(stream)
        self.assertEqual(6, len(frames))
        self.assertEqual("hash", header.config_hash)

        lines = render_text(header, frames[0]).splitlines()
        self.assertEqual(6, len(lines))
        self.assertTrue(all(len(line) == 10 for line in lines))
        self.assertEqual(5, sum(line.count(str(founder)) for line in lines for founder in range(5)))

        pixmap = render_pixmap(header, frames[0], cell_size=4)
        self.assertTrue(pixmap.startswith(b"P6\n40 24\n255\n"))
        self.assertEqual(len(b"P6\n40 24\n255\n") + 40 * 24 * 3, len(pixmap))

    def test_legend_glyphs(self):
        state = empty_world(food_layout=FoodLayout.parse("tiles:0,0;1,0"))
        state.food[0, 1] = 1.0
        state.place_agent((2, 0), Genome((3,)))
        stream = StringIO()
        EpisodeRecorder(stream, state)
        stream.seek(0)
        header, frames = read_episode(stream)
        self.assertEqual("#+3.....", render_text(header, frames[0]).splitlines()[0])


if __name__ == "__main__":
    unittest.main()
