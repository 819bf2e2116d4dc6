import os
import shutil
import sys
import tempfile
import unittest
from unittest import mock

from analytics import read_csv
from cmaes import check_dimension
from evdn import PolicyPool, checkpoint_directory, latest_checkpoint
from kinlab_cli import ConfigError, RunConfig, Settings
from kinlab_cli.cli import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    METRICS_FIELDS,
    Cli,
    episode_log_path,
    main,
)
from kinrew import RewardKind
from neural import Architecture
from world import ReproductionMode

PRESET_DIRECTORY = os.path.join(os.path.dirname(__file__), "..", "presets")

TINY_CONFIG = """# Tiny run for tests
[run]
name = tiny
seed = 0

[world]
width = 8
height = 8
founder_count = 2
count_soft_cap = 10.0

[network]
architecture = small_conv
hidden_widths = 4
conv_channels = 2

[trainer]
env_count = 2
train_length_min = 5
train_length_max = 8
total_ticks = 6
checkpoint_interval = 3
epsilon_decay_ticks = 5

[cmaes]
population_size = 4
generations = 1
episodes_per_candidate = 1
episode_length = 5

[evaluation]
episodes = 2
length = 6
"""


class TestRunConfig(unittest.TestCase):
    DIAGNOSTICS: list[tuple[str, int]] = [
        ("[run]\nname = x\n\n[world]\nwidth = abc\n", 5),
        ("[world]\nwidht = 3\n", 2),
        ("[run]\nname = x\n[colony]\nsize = 1\n", 3),
        ("[run]\nseed = 1\n[trainer]\nenv_count = 0\n", 3),
        ("[world]\nreproduction_mode = budding\n", 2),
        ("width = 3\n", 1),
    ]

    def test_diagnostics(self):
        for text, lineno in TestRunConfig.DIAGNOSTICS:
            with self.subTest(text=text):
                with self.assertRaises(ConfigError) as context:
                    RunConfig.parse(text, "bad.cfg")
                self.assertEqual(lineno, context.exception.lineno)
                self.assertEqual("bad.cfg", context.exception.path)
                self.assertTrue(str(context.exception).startswith(f"bad.cfg:{lineno}: "))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            RunConfig.load("/nonexistent/run.cfg")

    def test_values(self):
        config = RunConfig.parse(TINY_CONFIG)
        self.assertEqual("tiny", config.name)
        self.assertEqual(8, config.world.width)
        self.assertEqual(0, config.world.seed)
        self.assertEqual((4,), config.network.hidden_widths)
        self.assertEqual(5, config.trainer.epsilon.decay_ticks)
        self.assertEqual(config.reward, config.trainer.reward)
        self.assertEqual(4, config.cmaes.population_size)

        config = RunConfig.parse("[reward]\ncarrying_capacity = auto\nkind = sugary\n[world]\nmask_kinship = yes\n")
        self.assertIsNone(config.reward.carrying_capacity)
        self.assertEqual(RewardKind.SUGARY, config.reward.kind)
        self.assertTrue(config.world.mask_kinship)

    def test_hash(self):
        config = RunConfig.parse(TINY_CONFIG)
        self.assertEqual(64, len(config.config_hash()))
        self.assertEqual(config, RunConfig.parse(config.render()))
        self.assertEqual(config.config_hash(), RunConfig.parse(config.render()).config_hash())

        reordered = TINY_CONFIG.replace(
            "width = 8\nheight = 8\nfounder_count = 2\ncount_soft_cap = 10.0",
            "count_soft_cap = 10\n; same values, other order\nfounder_count=2\nheight = 8\nwidth   = 8",
        )
        self.assertEqual(config.config_hash(), RunConfig.parse(reordered).config_hash())

        changed = RunConfig.parse(TINY_CONFIG.replace("total_ticks = 6", "total_ticks = 7"))
        self.assertNotEqual(config.config_hash(), changed.config_hash())

    def test_output_root(self):
        config = RunConfig.parse(TINY_CONFIG)
        settings = Settings("from-settings", 1, 1)
        with mock.patch.dict(os.environ, {"KINLAB_OUTPUT_ROOT": ""}):
            self.assertEqual("from-settings", config.output_root(settings))
            with_dir = RunConfig.parse(TINY_CONFIG.replace("seed = 0", "seed = 0\noutput_dir = out"))
            self.assertEqual("out", with_dir.output_root(settings))
        with mock.patch.dict(os.environ, {"KINLAB_OUTPUT_ROOT": "from-env"}):
            self.assertEqual("from-env", config.output_root(settings))
            self.assertEqual(
                os.path.join("from-env", f"tiny-{config.config_hash()[:12]}"),
                config.run_directory(settings),
            )

    def test_presets(self):
        names = sorted(os.listdir(PRESET_DIRECTORY))
        self.assertEqual(7, len(names))
        self.assertIn("paper-asexual.cfg", names)
        for name in names:
            with self.subTest(name=name):
                config = RunConfig.load(os.path.join(PRESET_DIRECTORY, name))
                self.assertEqual(os.path.splitext(name)[0], config.name)
                if "cmaes" in name:
                    check_dimension(config.network, config.cmaes.max_dimension)
                if name.endswith("-sexual.cfg"):
                    self.assertEqual(ReproductionMode.SEXUAL, config.world.reproduction_mode)
                    self.assertEqual(32, config.world.genome_length)

        reference = RunConfig.load(os.path.join(PRESET_DIRECTORY, "paper-asexual.cfg"))
        world = reference.world
        self.assertEqual((50, 50, 5), (world.width, world.height, world.founder_count))
        self.assertEqual((10.0, 2), (world.endowment, world.initial_health))
        self.assertEqual((5, 40, 50), (world.fertility_start, world.fertility_end, world.longevity))
        self.assertEqual((0.15, 3.0), (world.food_growth_rate, world.food_capacity))
        self.assertEqual(ReproductionMode.ASEXUAL, world.reproduction_mode)
        self.assertEqual((450, 550), (reference.trainer.train_length_min, reference.trainer.train_length_max))
        self.assertEqual(Architecture.SMALL_CONV, reference.network.architecture)
        self.assertEqual(23_627, reference.network.parameter_count())

        full = RunConfig.load(os.path.join(PRESET_DIRECTORY, "full-asexual.cfg"))
        self.assertEqual(reference.world, full.world)
        self.assertEqual(reference.trainer, full.trainer)


class TestCli(unittest.TestCase):
    def setUp(self):
        self.__directory = tempfile.TemporaryDirectory()
        self.root = self.__directory.name
        self.config_path = os.path.join(self.root, "tiny.cfg")
        with open(self.config_path, "w", encoding="utf-8") as config_file:
            config_file.write(TINY_CONFIG)
        patcher = mock.patch.dict(os.environ, {"KINLAB_OUTPUT_ROOT": os.path.join(self.root, "runs")})
        patcher.start()
        self.addCleanup(patcher.stop)

    def tearDown(self):
        self.__directory.cleanup()

    def test_train_evaluate_render(self):
        cli = Cli("WARNING")
        run_dir = cli.train_evdn(self.config_path)
        config = RunConfig.load(self.config_path)
        self.assertEqual(config.run_directory(), run_dir)

        provenance, header, rows = read_csv(os.path.join(run_dir, "metrics.csv"))
        self.assertEqual(config.config_hash(), provenance["config_hash"])
        self.assertEqual(list(METRICS_FIELDS), header)
        self.assertEqual(12, len(rows))
        self.assertTrue(all(len(row) == len(METRICS_FIELDS) for row in rows))
        with open(os.path.join(run_dir, "config.ini"), "r", encoding="utf-8") as config_file:
            self.assertEqual(config.render(), config_file.read())

        checkpoint_root = os.path.join(run_dir, "checkpoints")
        self.assertTrue(latest_checkpoint(checkpoint_root).endswith("tick_0000000006"))

        # Training is complete, so resuming adds nothing
        cli.train_evdn(self.config_path)
        self.assertEqual(12, len(read_csv(os.path.join(run_dir, "metrics.csv"))[2]))

        output_dir = cli.eval(self.config_path, checkpoint_root)
        for name in ["episodes.csv", "population.csv", "summary.json"]:
            self.assertTrue(os.path.isfile(os.path.join(output_dir, name)))
        self.assertEqual(2, len(read_csv(os.path.join(output_dir, "episodes.csv"))[2]))
        self.assertEqual(7, len(read_csv(os.path.join(output_dir, "population.csv"))[2]))
        self.assertTrue(os.path.isfile(episode_log_path(output_dir, 0)))

        text_path = os.path.join(self.root, "frames.txt")
        cli.render(output_dir, 0, "text", text_path)
        with open(text_path, "r", encoding="utf-8") as text_file:
            text = text_file.read()
        self.assertIn("\ntick 0\n", text)
        self.assertIn("\ntick 6\n", text)

        ppm_dir = os.path.join(self.root, "frames")
        cli.render(output_dir, 0, "ppm", ppm_dir)
        self.assertTrue(os.path.isfile(os.path.join(ppm_dir, "frame_0000.ppm")))
        self.assertTrue(os.path.isfile(os.path.join(ppm_dir, "legend.txt")))

        with self.assertRaises(ValueError):
            cli.render(output_dir, 0, "gif")
        with self.assertRaises(ValueError):
            cli.render(output_dir, 5)

        ablate_dir = cli.ablate(self.config_path, checkpoint_root, family=1, episodes=1, length=3)
        self.assertTrue(os.path.isfile(os.path.join(ablate_dir, "families.csv")))
        drift_dir = cli.drift(self.config_path, checkpoint_root, episodes=1, length=3)
        self.assertTrue(os.path.isfile(os.path.join(drift_dir, "entropy.csv")))

        latest = latest_checkpoint(checkpoint_root)
        pairs = [
            f"{os.path.join(latest, 'policy_0.klqn')}@0",
            f"{os.path.join(latest, 'policy_1.klqn')}@1",
            f"{os.path.join(latest, 'policy_0.klqn')}@2",
            f"{os.path.join(latest, 'policy_1.klqn')}@3",
        ]
        match_dir = cli.headtohead(self.config_path, *pairs, episodes=2, length=3)
        self.assertEqual(2 * 4 * 4, len(read_csv(os.path.join(match_dir, "families.csv"))[2]))
        with self.assertRaises(ValueError):
            cli.headtohead(self.config_path, *pairs[:3])

    def test_fresh_start_replaces_previous_run(self):
        cli = Cli("WARNING")
        run_dir = cli.train_evdn(self.config_path)
        metrics_path = os.path.join(run_dir, "metrics.csv")
        _, _, first_rows = read_csv(metrics_path)
        checkpoint_root = os.path.join(run_dir, "checkpoints")
        stale = checkpoint_directory(checkpoint_root, 99)
        os.makedirs(stale)
        with open(os.path.join(stale, "trainer.json"), "w", encoding="utf-8") as state_file:
            state_file.write("{}")

        cli.train_evdn(self.config_path, resume=False)
        _, header, rows = read_csv(metrics_path)
        self.assertEqual(list(METRICS_FIELDS), header)
        self.assertEqual(first_rows, rows)
        self.assertEqual(["tick_0000000003", "tick_0000000006"], sorted(os.listdir(checkpoint_root)))

    def test_resume_writes_replayed_ticks_once(self):
        cli = Cli("WARNING")
        run_dir = cli.train_evdn(self.config_path)
        metrics_path = os.path.join(run_dir, "metrics.csv")
        _, _, full_rows = read_csv(metrics_path)

        # Lose everything after the tick 3 checkpoint
        checkpoint_root = os.path.join(run_dir, "checkpoints")
        shutil.rmtree(checkpoint_directory(checkpoint_root, 6))
        cli.train_evdn(self.config_path)
        _, _, rows = read_csv(metrics_path)
        self.assertEqual(full_rows, rows)
        self.assertEqual([0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5], [int(row[0]) for row in rows])

    def test_train_cmaes(self):
        run_dir = Cli("WARNING").train_cmaes(self.config_path)
        self.assertTrue(os.path.isfile(os.path.join(run_dir, "cmaes.klcm")))
        _, header, rows = read_csv(os.path.join(run_dir, "generations.csv"))
        self.assertEqual("generation", header[0])
        self.assertEqual(2, len(rows))
        self.assertEqual(2, len(PolicyPool.load(os.path.join(run_dir, "policies", "elite"))))

    def test_train_cmaes_refuses_large_network(self):
        large = TINY_CONFIG.replace(
            "architecture = small_conv\nhidden_widths = 4\nconv_channels = 2",
            "architecture = large_mlp",
        )
        with open(self.config_path, "w", encoding="utf-8") as config_file:
            config_file.write(large)
        with self.assertRaisesRegex(ValueError, "parameter count exceeds CMA-ES guard"):
            Cli("WARNING").train_cmaes(self.config_path)
        self.assertFalse(os.path.isdir(os.path.join(self.root, "runs")))

    def test_exit_codes(self):
        with mock.patch.object(sys, "argv", ["kinlab", "render", os.path.join(self.root, "missing")]):
            with self.assertRaises(SystemExit) as context:
                main()
            self.assertEqual(EXIT_CONFIG_ERROR, context.exception.code)

        with mock.patch.object(
            sys, "argv", ["kinlab", "cmaes_selftest", "--dimension=2", "--generations=200"]
        ):
            with self.assertRaises(SystemExit) as context:
                main()
            self.assertEqual(EXIT_OK, context.exception.code)


if __name__ == "__main__":
    unittest.main()
