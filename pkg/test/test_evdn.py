from dataclasses import replace
import os
import tempfile
import unittest

import numpy as np
from scipy import stats

from evdn import (
    EpsilonSchedule,
    EvdnTrainer,
    Experience,
    PolicyPool,
    TrainerConfig,
    act,
    checkpoint_directory,
    collect_environment,
    composed_output_gradients,
    dqn_update,
    episode_seeds,
    greedy_joint_values,
    joint_q,
    joint_q_batch,
    latest_checkpoint,
    learning_target,
    learning_targets,
    network_slots,
    select_actions,
    terminal_estimate,
    vdn_mean_output_gradients,
)
from kinrew import RewardConfig
from neural import (
    Architecture,
    NetworkSpec,
    OptimizerConfig,
    OptimizerKind,
    OptimizerState,
    QNetwork,
    forward,
)
from world import Action, FoodLayout, Genome, ReproductionMode, WorldConfig, init_world, observe, step
from world.state import WorldState

SMALL_SPEC = NetworkSpec(Architecture.SMALL_CONV, (16,), 4)


def small_world(**overrides) -> WorldConfig:
    return replace(WorldConfig(width=10, height=10, count_soft_cap=20.0), **overrides)


def small_trainer_config(**overrides) -> TrainerConfig:
    config = TrainerConfig(
        env_count=2,
        train_length_min=15,
        train_length_max=25,
        total_ticks=30,
        checkpoint_interval=10,
        seed=3,
        epsilon=EpsilonSchedule(1.0, 0.1, 20),
        optimizer=OptimizerConfig(OptimizerKind.ADAM, 1e-3),
    )
    return replace(config, **overrides)


def dummy_experience(**overrides) -> Experience:
    state = WorldState.empty(WorldConfig(width=6, height=6))
    agent = state.place_agent((1, 1), Genome((0,)))
    observation = observe(state, agent.id)
    experience = Experience(
        agent.id,
        0,
        observation,
        0,
        0.0,
        observation,
        np.ones(1),
        False,
        np.zeros(0),
        np.zeros(0),
    )
    return replace(experience, **overrides)


class TestComposition(unittest.TestCase):
    JOINT_VALUES: list[tuple[list[float], list[float], float]] = [
        ([7.0], [1.0], 7.0),
        ([2.0, 4.0], [1.0, 1.0], 3.0),
        ([2.0, 4.0], [1.0, 0.5], 8.0 / 3.0),
        ([2.0, 4.0, 100.0], [1.0, 0.5, 0.0], 8.0 / 3.0),
    ]

    def test_joint_q(self):
        for values, kinships, expected in TestComposition.JOINT_VALUES:
            with self.subTest(values=values, kinships=kinships):
                self.assertAlmostEqual(expected, joint_q(np.array(values), np.array(kinships)))

        with self.assertRaises(ValueError):
            joint_q(np.array([1.0]), np.array([0.0]))
        with self.assertRaises(ValueError):
            joint_q(np.array([1.0, 2.0]), np.array([1.0]))

    def test_joint_q_batch(self):
        kinships = np.array([[1.0, 0.5], [0.5, 1.0]])
        values = np.array([2.0, 4.0])
        np.testing.assert_array_almost_equal([8.0 / 3.0, 10.0 / 3.0], joint_q_batch(kinships, values))
        with self.assertRaises(ValueError):
            joint_q_batch(np.zeros((1, 2)), values)

    def test_joint_q_is_monotone_in_own_value(self):
        kinships = np.array([1.0, 0.5, 0.25])
        own_values = np.array([0.3, -1.0, 2.5, 0.7])
        joint = [joint_q(np.array([own, 1.0, -2.0]), kinships) for own in own_values]
        self.assertEqual(int(np.argmax(own_values)), int(np.argmax(joint)))

    def test_terminal_estimate(self):
        self.assertEqual(0.0, terminal_estimate(np.zeros(0), np.zeros(0)))
        self.assertEqual(0.0, terminal_estimate(np.array([5.0]), np.array([0.0])))
        self.assertEqual(9.0, terminal_estimate(np.array([9.0]), np.array([1.0])))

    def test_greedy_joint_values(self):
        kinships = np.array([[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_array_equal(
            [3.0, 0.0], greedy_joint_values(kinships, np.array([3.0, 8.0]))
        )
        np.testing.assert_array_equal([0.0], greedy_joint_values(np.zeros((1, 0)), np.zeros(0)))

    def test_learning_target(self):
        terminal = dummy_experience(next_observation=None, terminal=True)
        self.assertEqual(0.0, learning_target(terminal, 0.9, 100.0))

        twin_survived = dummy_experience(
            next_observation=None,
            terminal=True,
            survivor_values=np.array([9.0, 1.0]),
            survivor_kinships=np.array([1.0, 0.0]),
        )
        self.assertEqual(9.0, learning_target(twin_survived, 0.9, 100.0))

        self.assertEqual(1.5, learning_target(dummy_experience(reward=1.5), 0.0, 10.0))
        self.assertAlmostEqual(10.5, learning_target(dummy_experience(reward=1.5), 0.9, 10.0))

        targets = learning_targets(
            np.array([1.5, 0.0]), 0.9, np.array([10.0, 4.0]), np.array([True, False])
        )
        np.testing.assert_array_almost_equal([10.5, 4.0], targets)

    def test_vdn_mean_proportionality(self):
        rng = np.random.default_rng(0)
        for team_size in [1, 2, 5]:
            with self.subTest(team_size=team_size):
                residuals = rng.normal(size=team_size)
                experience_count = 3 * team_size
                composed = composed_output_gradients(
                    np.ones((team_size, team_size)), residuals, experience_count
                )
                vdn = sum(vdn_mean_output_gradients(residual, team_size) for residual in residuals)
                np.testing.assert_allclose(composed * experience_count, vdn)

    def test_unrelated_agents_receive_no_gradient(self):
        kinships = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]])
        gradients = composed_output_gradients(kinships, np.array([1.0, 0.0, 0.0]), 3)
        self.assertEqual(0.0, gradients[2])
        self.assertNotEqual(0.0, gradients[1])
        self.assertAlmostEqual(-2.0 * 0.5 / 1.5 / 3.0, gradients[1])


class TestActing(unittest.TestCase):
    def test_uniform_exploration(self):
        rng = np.random.default_rng(1)
        heads = select_actions(np.zeros((10_000, 10)), 1.0, rng)
        counts = np.bincount(heads, minlength=10)
        self.assertGreater(stats.chisquare(counts).pvalue, 0.001)

    def test_greedy(self):
        rng = np.random.default_rng(1)
        q_values = np.array([[0.0, 3.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]])
        self.assertEqual(1, select_actions(q_values, 0.0, rng)[0])
        self.assertEqual(1, select_actions(q_values + 123.0, 0.0, rng)[0])
        self.assertEqual(0, select_actions(np.zeros((1, 10)), 0.0, rng)[0])

        with self.assertRaises(ValueError):
            select_actions(q_values, 1.5, rng)

    def test_act(self):
        state = WorldState.empty(WorldConfig(width=6, height=6))
        agent = state.place_agent((1, 1), Genome((0,)))
        observation = observe(state, agent.id)
        net = QNetwork.create(SMALL_SPEC, 0)
        expected = Action.from_index(int(np.argmax(forward(net, observation))))
        self.assertEqual(expected, act(net, observation, 0.0, np.random.default_rng(0)))


class TestPolicyPool(unittest.TestCase):
    def test_for_world(self):
        self.assertEqual(5, len(PolicyPool.for_world(SMALL_SPEC, WorldConfig(), 0)))
        sexual = WorldConfig(reproduction_mode=ReproductionMode.SEXUAL, genome_length=32)
        self.assertEqual(1, len(PolicyPool.for_world(SMALL_SPEC, sexual, 0)))

    def test_assignments(self):
        pool = PolicyPool.create(SMALL_SPEC, 5, 0)
        rng = np.random.default_rng(0)
        assignments = [pool.training_assignment(5, rng) for _ in range(50)]
        self.assertTrue(all(len(assignment) == 5 for assignment in assignments))
        self.assertTrue(all(0 <= slot < 5 for assignment in assignments for slot in assignment))
        # Sampling with replacement repeats networks within an episode
        self.assertTrue(any(len(set(assignment)) < 5 for assignment in assignments))
        self.assertEqual((0, 1, 2, 3, 4), pool.identity_assignment(5))
        with self.assertRaises(ValueError):
            pool.identity_assignment(4)

        single = PolicyPool.create(SMALL_SPEC, 1, 0)
        self.assertEqual((0, 0, 0), single.training_assignment(3, rng))

    def test_network_slots(self):
        state = init_world(small_world())
        assignment = (4, 4, 0, 1, 2)
        slots = network_slots(state, state.living_ids(), assignment)
        expected = [assignment[state.agents[agent_id].policy_slot] for agent_id in state.living_ids()]
        np.testing.assert_array_equal(expected, slots)

    def test_save_and_load(self):
        pool = PolicyPool.create(SMALL_SPEC, 3, 2)
        with tempfile.TemporaryDirectory() as directory:
            pool.save(directory)
            loaded = PolicyPool.load(directory)
        self.assertEqual(3, len(loaded))
        for net, loaded_net in zip(pool.nets, loaded.nets):
            np.testing.assert_array_equal(net.parameters, loaded_net.parameters)

        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaises(ValueError):
                PolicyPool.load(directory)


class TestTrainer(unittest.TestCase):
    def test_epsilon_schedule(self):
        schedule = EpsilonSchedule(1.0, 0.1, 10)
        self.assertEqual(1.0, schedule.value(0))
        self.assertAlmostEqual(0.55, schedule.value(5))
        self.assertEqual(0.1, schedule.value(10))
        self.assertEqual(0.1, schedule.value(1_000))

    def test_episode_seeds_are_distinct(self):
        seeds = {episode_seeds(0, env, episode).world for env in range(4) for episode in range(4)}
        self.assertEqual(16, len(seeds))

    def test_train_epoch(self):
        trainer = EvdnTrainer.create(small_world(), small_trainer_config(), SMALL_SPEC)
        populations = [env.state.population() for env in trainer.environments]
        report = trainer.train_epoch()
        self.assertEqual(0, report.tick)
        self.assertEqual(1.0, report.epsilon)
        self.assertEqual(sum(populations), report.experience_count)
        self.assertEqual(2, len(report.environments))
        self.assertTrue(np.isfinite(report.loss))
        self.assertEqual(1, trainer.tick)
        for env in trainer.environments:
            self.assertTrue(15 <= env.length <= 25)

    def test_episode_lengths_follow_range(self):
        trainer = EvdnTrainer.create(small_world(), small_trainer_config(), SMALL_SPEC)
        finished = 0
        for _ in range(60):
            finished += trainer.train_epoch().episodes_finished
        self.assertGreaterEqual(finished, 2)
        for env in trainer.environments:
            self.assertGreater(env.episode, 0)

    def test_degenerate_equivalence_with_dqn(self):
        # One founder in a sexual world never finds a mate, so the census stays {self}
        world_config = WorldConfig(
            width=8,
            height=8,
            reproduction_mode=ReproductionMode.SEXUAL,
            genome_length=32,
            founder_count=1,
            food_layout=FoodLayout.parse("random:0.5"),
            count_soft_cap=10.0,
        )
        config = TrainerConfig(
            env_count=1,
            train_length_min=20,
            train_length_max=40,
            total_ticks=0,
            seed=11,
            epsilon=EpsilonSchedule(0.5, 0.05, 200),
            reward=RewardConfig(gamma=0.9),
            optimizer=OptimizerConfig(OptimizerKind.ADAM, 1e-3),
        )
        trainer = EvdnTrainer.create(world_config, config, SMALL_SPEC)

        net = QNetwork.create(SMALL_SPEC, config.seed)
        optimizer_state = OptimizerState()

        def start(episode: int):
            seeds = episode_seeds(config.seed, 0, episode)
            schedule_rng = np.random.default_rng(seeds.schedule)
            length = int(schedule_rng.integers(config.train_length_min, config.train_length_max + 1))
            state = init_world(replace(world_config, seed=seeds.world))
            return state, length, np.random.default_rng(seeds.acting)

        episode = 0
        state, length, rng = start(episode)
        elapsed = 0
        for tick in range(1_000):
            trainer.train_epoch()

            agent_id = state.living_ids()[0]
            observation = observe(state, agent_id)
            q_values = forward(net, observation)[None, :]
            action_index = int(select_actions(q_values, config.epsilon.value(tick), rng)[0])
            step(state, {agent_id: Action.from_index(action_index)})
            next_observation = observe(state, agent_id) if agent_id in state.agents else None
            net, optimizer_state, _ = dqn_update(
                net, optimizer_state, config.optimizer, observation, action_index, 1.0, next_observation, 0.9
            )
            elapsed += 1
            if state.population() == 0 or elapsed >= length:
                episode += 1
                state, length, rng = start(episode)
                elapsed = 0

        self.assertGreater(episode, 10)
        np.testing.assert_array_equal(net.parameters, trainer.pool.nets[0].parameters)

    def test_non_finite_loss(self):
        trainer = EvdnTrainer.create(small_world(), small_trainer_config(), SMALL_SPEC)
        broken = QNetwork(SMALL_SPEC, np.full(SMALL_SPEC.parameter_count(), np.nan))
        trainer.pool.nets = [broken] * len(trainer.pool.nets)
        with self.assertRaises(FloatingPointError):
            trainer.train_epoch()
        self.assertEqual(0, trainer.diagnostic()["tick"])
        self.assertIn("batches", trainer.diagnostic())

    def test_checkpoint_resume_is_exact(self):
        world_config = small_world()
        config = small_trainer_config()
        trainer = EvdnTrainer.create(world_config, config, SMALL_SPEC)
        for _ in range(12):
            trainer.train_epoch()

        with tempfile.TemporaryDirectory() as root:
            directory = checkpoint_directory(root, trainer.tick)
            trainer.save(directory)
            self.assertEqual(directory, latest_checkpoint(root))
            resumed = EvdnTrainer.resume(directory, world_config, config, SMALL_SPEC)

            with self.assertRaises(ValueError):
                EvdnTrainer.resume(
                    directory, world_config, config, NetworkSpec(Architecture.SMALL_CONV, (8,), 4)
                )
            with self.assertRaises(ValueError):
                EvdnTrainer.resume(directory, world_config, replace(config, env_count=3), SMALL_SPEC)

        self.assertEqual(trainer.tick, resumed.tick)
        for _ in range(8):
            expected = trainer.train_epoch()
            actual = resumed.train_epoch()
            self.assertEqual(expected.loss, actual.loss)
        for net, resumed_net in zip(trainer.pool.nets, resumed.pool.nets):
            np.testing.assert_array_equal(net.parameters, resumed_net.parameters)

    def test_train_writes_checkpoints(self):
        trainer = EvdnTrainer.create(small_world(), small_trainer_config(total_ticks=20), SMALL_SPEC)
        epochs = []
        with tempfile.TemporaryDirectory() as root:
            trainer.train(root, epochs.append)
            self.assertEqual(20, len(epochs))
            self.assertEqual(["tick_0000000010", "tick_0000000020"], sorted(os.listdir(root)))
            self.assertEqual(checkpoint_directory(root, 20), latest_checkpoint(root))

    def test_parallel_rollouts_match_serial(self):
        config = small_trainer_config(env_count=4, total_ticks=12)
        results = []
        for workers in [1, 3]:
            trainer = EvdnTrainer.create(small_world(), replace(config, workers=workers), SMALL_SPEC)
            epochs = []
            trainer.train(None, epochs.append)
            results.append((trainer, [epoch.loss for epoch in epochs]))

        (serial, serial_losses), (parallel, parallel_losses) = results
        self.assertEqual(serial_losses, parallel_losses)
        for net, parallel_net in zip(serial.pool.nets, parallel.pool.nets):
            np.testing.assert_array_equal(net.parameters, parallel_net.parameters)
        for env, parallel_env in zip(serial.environments, parallel.environments):
            self.assertEqual(env.index, parallel_env.index)
            np.testing.assert_array_equal(env.state.occupant, parallel_env.state.occupant)

    def test_experiences_match_batched_targets(self):
        trainer = EvdnTrainer.create(small_world(), small_trainer_config(), SMALL_SPEC)
        env = trainer.environments[0]
        gamma = trainer.config.reward.gamma
        terminals = 0
        for _ in range(60):
            env, batch, _ = collect_environment(trainer.pool, trainer.config.reward.kind, env, 1.0)
            next_values = greedy_joint_values(batch.next_kinships, batch.next_greedy)
            targets = learning_targets(batch.rewards, gamma, next_values, batch.alive)
            experiences = list(batch.experiences())
            self.assertEqual(len(batch), len(experiences))
            for row, experience in enumerate(experiences):
                self.assertEqual(batch.agent_ids[row], experience.agent_id)
                self.assertEqual(experience.terminal, experience.next_observation is None)
                self.assertAlmostEqual(
                    targets[row], learning_target(experience, gamma, float(next_values[row]))
                )
                terminals += int(experience.terminal)
        # Founders die of old age at the latest
        self.assertGreater(terminals, 0)

if __name__ == "__main__":
    unittest.main()
