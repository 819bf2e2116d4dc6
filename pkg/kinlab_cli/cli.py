import csv
import fire
import logging
import os
import shutil
import sys
from dataclasses import replace
from typing import Any, TextIO

import numpy as np

from analytics import (
    EvaluationConfig,
    EvaluationResult,
    TickMetrics,
    ablate_intra_family_attacks,
    evaluate,
    head_to_head,
    kin_masking_drift,
    read_csv,
    run_episode,
    summary_document,
    write_csv,
    write_csv_stream,
    write_json,
)
from cmaes import (
    CHECKPOINT_FILE,
    CmaesTrainer,
    GenerationReport,
    check_dimension,
    sphere_selftest,
)
from evdn import EpochReport, EvdnTrainer, PolicyPool, latest_checkpoint
from neural import NetworkCheckpoint
from world import legend, read_episode, render_pixmap, render_text

from .run_config import RunConfig, Settings

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_FAILURE = 3

CONFIG_FILE = "config.ini"
METRICS_FILE = "metrics.csv"
NAN_DUMP_FILE = "nan_dump.json"
EPISODE_LOG_DIRECTORY = "episodes"

METRICS_FIELDS = ("step", "env", "episode", "epsilon", "loss") + TickMetrics.CSV_FIELDS
GENERATION_FIELDS = (
    "generation",
    "stage",
    "family",
    "mean_fitness",
    "best_fitness",
    "elite_fitness",
    "median_births_per_family",
)
SERIES_FIELDS = ("tick", "mean", "half_width")


def episode_log_path(run_dir: str, episode: int) -> str:
    return os.path.join(run_dir, EPISODE_LOG_DIRECTORY, f"episode_{episode:04d}.jsonl")


def _kept_rows(path: str, resume_step: int | None) -> list[list[str]]:
    """Rows of an existing CSV whose first column is below `resume_step`"""
    if resume_step is None or not os.path.isfile(path):
        return []
    _, _, rows = read_csv(path)
    return [row for row in rows if int(row[0]) < resume_step]


class _MetricsStream:
    """Writes per-tick metrics of every training environment to `metrics.csv`

    A resumed run keeps the rows before the checkpoint tick, so ticks replayed
    after a crash are written once. A fresh run rewrites the file.
    """

    def __init__(
        self, path: str, config_hash: str, seed: int, flush_every: int, resume_step: int | None
    ):
        kept = _kept_rows(path, resume_step)
        self.__file = open(path, "w", encoding="utf-8", newline="")
        write_csv_stream(self.__file, METRICS_FIELDS, kept, config_hash, seed)
        self.__writer = csv.writer(self.__file, lineterminator="\n")
        self.__flush_every = max(1, flush_every)
        self.__count = 0

    def __call__(self, report: EpochReport) -> None:
        for environment in report.environments:
            metrics = TickMetrics.from_tick(
                environment.events, environment.population_before, environment.state
            )
            self.__writer.writerow(
                [report.tick, environment.env_index, environment.episode, report.epsilon, report.loss]
                + metrics.to_row()
            )
        self.__count += 1
        if self.__count % self.__flush_every == 0:
            self.__file.flush()

    def close(self) -> None:
        self.__file.close()


class Cli:
    """Kin Evolution Lab CLI

    Exit codes: 0 success, 2 configuration error, 3 numeric failure.

    Args:
        log_level (str, optional): Log level. Defaults to "INFO". {CRITICAL|FATAL|ERROR|WARN|WARNING|INFO|DEBUG|NOTSET}
    """

    @staticmethod
    def __config_logger(level: str) -> None:
        """Config logger

        Args:
            level (str): Log level
        """

        logging.basicConfig(
            level=level,
            format="[%(asctime)s] %(levelname)s [%(name)s.%(funcName)s:%(lineno)d] %(message)s",
        )

    def __init__(self, log_level="INFO"):
        """Kin Evolution Lab CLI

        Args:
            log_level (str, optional): Log level. Defaults to "INFO". {CRITICAL|FATAL|ERROR|WARN|WARNING|INFO|DEBUG|NOTSET}
        """

        Cli.__config_logger(log_level)
        self.__logger = logging.getLogger(__name__)
        self.__settings = Settings.load()

    def __prepare_run(self, config_path: str) -> tuple[RunConfig, str]:
        if not isinstance(config_path, str):
            raise ValueError("Argument `config_path` must be str.")
        config = RunConfig.load(config_path)
        run_dir = config.run_directory(self.__settings)
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, CONFIG_FILE), "w", encoding="utf-8") as config_file:
            config_file.write(config.render())
        self.__logger.info(
            f"Run directory prepared. run_dir={run_dir} config_hash={config.config_hash()}"
        )
        return config, run_dir

    def __evaluation_config(
        self,
        config: RunConfig,
        episodes: int | None,
        length: int | None,
        seed: int | None,
    ) -> EvaluationConfig:
        evaluation = config.evaluation
        if episodes is not None:
            evaluation = replace(evaluation, episodes=int(episodes))
        if length is not None:
            evaluation = replace(evaluation, length=int(length))
        if seed is not None:
            evaluation = replace(evaluation, seed=int(seed))
        if evaluation.workers == 1 and self.__settings.workers > 1:
            evaluation = replace(evaluation, workers=self.__settings.workers)
        evaluation.validate()
        return evaluation

    @staticmethod
    def __load_pool(config: RunConfig, checkpoint_dir: str) -> PolicyPool:
        if not isinstance(checkpoint_dir, str):
            raise ValueError("Argument `checkpoint_dir` must be str.")
        if os.path.isdir(checkpoint_dir) and latest_checkpoint(checkpoint_dir) is not None:
            checkpoint_dir = latest_checkpoint(checkpoint_dir)
        pool = PolicyPool.load(checkpoint_dir)
        if pool.spec() != config.network:
            raise ValueError(
                "Checkpoint architecture does not match the configuration. "
                f"checkpoint={pool.spec()} config={config.network}"
            )
        return pool

    @staticmethod
    def __artifact_directory(run_dir: str, command: str, seed: int) -> str:
        directory = os.path.join(run_dir, f"{command}-seed{seed}")
        os.makedirs(directory, exist_ok=True)
        return directory

    @staticmethod
    def __series_rows(mean: np.ndarray, half_width: np.ndarray) -> list[list[Any]]:
        return [[tick, float(m), float(h)] for tick, (m, h) in enumerate(zip(mean, half_width))]

    def train_evdn(self, config_path, resume=True) -> str:
        """Train with E-VDN

        Writes `config.ini`, `metrics.csv` and checkpoints under the run
        directory. Training resumes from the latest checkpoint of the run when
        one exists.
        Rows of `metrics.csv` after that checkpoint are dropped. A fresh start
        removes the run's checkpoints and rewrites `metrics.csv`.

        Args:
            config_path (str): Run config path
            resume (bool, optional): Resume from the latest checkpoint. Defaults to True.

        Raises:
            ValueError: Invalid configuration, or a checkpoint that does not match it
            FloatingPointError: Non-finite loss; `nan_dump.json` is written first

        Returns:
            str: Run directory
        """

        config, run_dir = self.__prepare_run(config_path)
        trainer_config = config.trainer
        if trainer_config.workers == 1 and self.__settings.workers > 1:
            trainer_config = replace(trainer_config, workers=self.__settings.workers)
        checkpoint_root = os.path.join(run_dir, "checkpoints")
        latest = latest_checkpoint(checkpoint_root) if resume else None
        if latest is None:
            if os.path.isdir(checkpoint_root):
                shutil.rmtree(checkpoint_root)
                self.__logger.info(f"Previous checkpoints removed. checkpoint_root={checkpoint_root}")
            trainer = EvdnTrainer.create(config.world, trainer_config, config.network)
        else:
            trainer = EvdnTrainer.resume(latest, config.world, trainer_config, config.network)

        metrics = _MetricsStream(
            os.path.join(run_dir, METRICS_FILE),
            config.config_hash(),
            config.seed,
            self.__settings.metrics_flush_every,
            None if latest is None else trainer.tick,
        )
        try:
            trainer.train(checkpoint_root, metrics, progress=True)
        except FloatingPointError:
            write_json(
                os.path.join(run_dir, NAN_DUMP_FILE),
                summary_document(
                    "nan-dump", config.config_hash(), [config.seed], trainer.diagnostic()
                ),
            )
            raise
        finally:
            metrics.close()
        return run_dir

    def train_cmaes(self, config_path, resume=True) -> str:
        """Train the CMA-ES baseline, one search distribution per founder family

        Args:
            config_path (str): Run config path
            resume (bool, optional): Resume from the run's checkpoint. Defaults to True.

        Raises:
            ValueError: Invalid configuration, or a network too large for CMA-ES

        Returns:
            str: Run directory
        """

        config = RunConfig.load(config_path) if isinstance(config_path, str) else None
        if config is None:
            raise ValueError("Argument `config_path` must be str.")
        check_dimension(config.network, config.cmaes.max_dimension)
        config, run_dir = self.__prepare_run(config_path)

        cmaes_config = config.cmaes
        if cmaes_config.workers == 1 and self.__settings.workers > 1:
            cmaes_config = replace(cmaes_config, workers=self.__settings.workers)
        checkpoint_path = os.path.join(run_dir, CHECKPOINT_FILE)
        resuming = resume and os.path.isfile(checkpoint_path)
        if resuming:
            trainer = CmaesTrainer.resume(
                checkpoint_path, config.world, cmaes_config, config.network
            )
        else:
            trainer = CmaesTrainer(config.world, cmaes_config, config.network)

        generations_path = os.path.join(run_dir, "generations.csv")
        rows: list[list[Any]] = _kept_rows(
            generations_path, trainer.generation if resuming else None
        )

        def on_generation(report: GenerationReport) -> None:
            for family in range(len(report.mean_fitness)):
                rows.append(
                    [
                        report.generation,
                        report.stage.value,
                        family,
                        float(report.mean_fitness[family]),
                        float(report.best_fitness[family]),
                        float(report.elite_fitness[family]),
                        report.median_births_per_family,
                    ]
                )
            write_csv(generations_path, GENERATION_FIELDS, rows, config.config_hash(), config.seed)

        trainer.train(checkpoint_path, on_generation, progress=True)
        trainer.mean_pool().save(os.path.join(run_dir, "policies", "mean"))
        trainer.elite_pool().save(os.path.join(run_dir, "policies", "elite"))
        return run_dir

    def cmaes_selftest(self, dimension=20, generations=200, seed=1) -> None:
        """Minimise the sphere function to check the CMA-ES wrapper

        Args:
            dimension (int, optional): Dimension. Defaults to 20.
            generations (int, optional): Generation budget. Defaults to 200.
            seed (int, optional): Seed. Defaults to 1.

        Raises:
            FloatingPointError: The target value was not reached
        """

        result = sphere_selftest(int(dimension), int(generations), seed=int(seed))
        if not result.converged:
            raise FloatingPointError(
                f"Sphere self-test did not converge. generations={result.generations} "
                f"best={result.best_value:.3e}"
            )
        self.__logger.info(
            f"Sphere self-test passed. generations={result.generations} best={result.best_value:.3e}"
        )

    def eval(
        self, config_path, checkpoint_dir, episodes=None, length=None, seed=None, record=1
    ) -> str:
        """Evaluate trained policies

        Writes `episodes.csv`, `population.csv` and `summary.json`, and records
        the frame log of the first `record` episodes for `render`.

        Args:
            config_path (str): Run config path
            checkpoint_dir (str): Policy checkpoint directory, or a checkpoint root
            episodes (int, optional): Episode count. Defaults to `[evaluation] episodes`.
            length (int, optional): Episode length. Defaults to `[evaluation] length`.
            seed (int, optional): Seed of the first episode. Defaults to `[run] seed`.
            record (int, optional): Episodes to record. Defaults to 1.

        Raises:
            ValueError: Invalid configuration or architecture mismatch

        Returns:
            str: Artifact directory
        """

        config, run_dir = self.__prepare_run(config_path)
        pool = Cli.__load_pool(config, checkpoint_dir)
        evaluation = self.__evaluation_config(config, episodes, length, seed)
        output_dir = Cli.__artifact_directory(run_dir, "eval", evaluation.seed)
        config_hash = config.config_hash()
        seeds = evaluation.episode_seeds()

        result: EvaluationResult = evaluate(config.world, pool, evaluation)
        write_csv(
            os.path.join(output_dir, "episodes.csv"),
            EvaluationResult.EPISODE_FIELDS,
            result.episode_rows(),
            config_hash,
            evaluation.seed,
        )
        write_csv(
            os.path.join(output_dir, "population.csv"),
            SERIES_FIELDS,
            Cli.__series_rows(*result.population_series()),
            config_hash,
            evaluation.seed,
        )
        write_json(
            os.path.join(output_dir, "summary.json"),
            summary_document("eval", config_hash, seeds, {"metrics": result.to_json_serializable()}),
        )

        assignment = pool.identity_assignment(config.world.founder_count)
        for episode in range(min(int(record), evaluation.episodes)):
            path = episode_log_path(output_dir, episode)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "w", encoding="utf-8") as log_file:
                run_episode(
                    config.world,
                    pool,
                    assignment,
                    evaluation.length,
                    seeds[episode],
                    evaluation.epsilon,
                    log_file,
                    config_hash,
                )
        return output_dir

    def headtohead(self, config_path, *pairs, episodes=None, length=None, seed=None) -> str:
        """Head-to-head match of four policies, one per founder family

        Args:
            config_path (str): Run config path
            *pairs (str): Exactly 4 `CHECKPOINT@GENOME` pairs; the first two are side A
            episodes (int, optional): Episode count. Defaults to `[evaluation] episodes`.
            length (int, optional): Episode length. Defaults to `[evaluation] length`.
            seed (int, optional): Seed of the first episode. Defaults to `[run] seed`.

        Raises:
            ValueError: Not exactly 4 pairs, malformed pair or mismatched architectures

        Returns:
            str: Artifact directory
        """

        entries = []
        for pair in pairs:
            path, separator, genome = str(pair).rpartition("@")
            if separator == "" or not genome.isdigit():
                raise ValueError(f"Pair must be CHECKPOINT@GENOME. pair={pair}")
            net = NetworkCheckpoint.load(path).net
            entries.append((net, int(genome)))
        if len(entries) != 4:
            raise ValueError(f"Head-to-head takes exactly 4 (checkpoint, genome) pairs. pairs={len(entries)}")

        config, run_dir = self.__prepare_run(config_path)
        if any(net.spec != config.network for net, _ in entries):
            raise ValueError("Checkpoint architecture does not match the configuration.")
        evaluation = self.__evaluation_config(config, episodes, length, seed)
        output_dir = Cli.__artifact_directory(run_dir, "headtohead", evaluation.seed)
        config_hash = config.config_hash()

        result = head_to_head(config.world, entries, evaluation)
        write_csv(
            os.path.join(output_dir, "families.csv"),
            result.FIELDS,
            result.rows(),
            config_hash,
            evaluation.seed,
        )
        document = result.to_json_serializable()
        document["pairs"] = [str(pair) for pair in pairs]
        write_json(
            os.path.join(output_dir, "summary.json"),
            summary_document("headtohead", config_hash, evaluation.episode_seeds(), document),
        )
        self.__logger.info(
            f"Head-to-head finished. statistic={result.gap_test.statistic:.3f} "
            f"p_value={result.gap_test.p_value:.4f}"
        )
        return output_dir

    def ablate(
        self, config_path, checkpoint_dir, family=None, episodes=None, length=None, seed=None
    ) -> str:
        """Paired runs with attacks inside one founder family open and blocked

        Args:
            config_path (str): Run config path
            checkpoint_dir (str): Policy checkpoint directory
            family (int, optional): Founder family. Defaults to `[evaluation] ablation_family`.
            episodes (int, optional): Episode count. Defaults to `[evaluation] episodes`.
            length (int, optional): Episode length. Defaults to `[evaluation] length`.
            seed (int, optional): Seed of the first episode. Defaults to `[run] seed`.

        Returns:
            str: Artifact directory
        """

        config, run_dir = self.__prepare_run(config_path)
        pool = Cli.__load_pool(config, checkpoint_dir)
        evaluation = self.__evaluation_config(config, episodes, length, seed)
        if family is not None:
            evaluation = replace(evaluation, ablation_family=int(family))
        output_dir = Cli.__artifact_directory(run_dir, "ablate", evaluation.seed)
        config_hash = config.config_hash()

        result = ablate_intra_family_attacks(config.world, pool, evaluation)
        write_csv(
            os.path.join(output_dir, "families.csv"),
            result.FIELDS,
            result.rows(),
            config_hash,
            evaluation.seed,
        )
        write_json(
            os.path.join(output_dir, "summary.json"),
            summary_document(
                "ablate", config_hash, evaluation.episode_seeds(), result.to_json_serializable()
            ),
        )
        return output_dir

    def drift(self, config_path, checkpoint_dir, episodes=None, length=None, seed=None) -> str:
        """Allele-entropy series with the kinship observation intact and zeroed

        Args:
            config_path (str): Run config path
            checkpoint_dir (str): Policy checkpoint directory
            episodes (int, optional): Episode count. Defaults to `[evaluation] episodes`.
            length (int, optional): Episode length. Defaults to `[evaluation] length`.
            seed (int, optional): Seed of the first episode. Defaults to `[run] seed`.

        Returns:
            str: Artifact directory
        """

        config, run_dir = self.__prepare_run(config_path)
        pool = Cli.__load_pool(config, checkpoint_dir)
        evaluation = self.__evaluation_config(config, episodes, length, seed)
        output_dir = Cli.__artifact_directory(run_dir, "drift", evaluation.seed)
        config_hash = config.config_hash()

        result = kin_masking_drift(config.world, pool, evaluation)
        write_csv(
            os.path.join(output_dir, "entropy.csv"),
            result.FIELDS,
            result.rows(),
            config_hash,
            evaluation.seed,
        )
        write_json(
            os.path.join(output_dir, "summary.json"),
            summary_document(
                "drift", config_hash, evaluation.episode_seeds(), result.to_json_serializable()
            ),
        )
        return output_dir

    def render(self, run_dir, episode=0, format="text", output=None, cell_size=8) -> None:
        """Render a recorded episode frame by frame

        Args:
            run_dir (str): Artifact directory holding `episodes/`, or an episode log path
            episode (int, optional): Recorded episode. Defaults to 0.
            format (str, optional): Frame format. Defaults to "text". {text|ppm}
            output (str, optional): Output file for text, output directory for ppm. Defaults to standard output for text.
            cell_size (int, optional): Pixels per tile for ppm. Defaults to 8.

        Raises:
            ValueError: Missing episode log or unknown format
        """

        if not isinstance(run_dir, str):
            raise ValueError("Argument `run_dir` must be str.")
        log_path = run_dir if os.path.isfile(run_dir) else episode_log_path(run_dir, int(episode))
        if not os.path.isfile(log_path):
            raise ValueError(f"Episode log not found. path={log_path}")
        with open(log_path, "r", encoding="utf-8") as log_file:
            header, frames = read_episode(log_file)
        families = sorted({agent[3] for frame in frames for agent in frame.agents})

        match format:
            case "text":
                stream: TextIO = (
                    sys.stdout if output is None else open(output, "w", encoding="utf-8")
                )
                try:
                    stream.write("\n".join(legend(families)) + "\n")
                    for frame in frames:
                        stream.write(f"\ntick {frame.tick}\n")
                        stream.write(render_text(header, frame))
                finally:
                    if stream is not sys.stdout:
                        stream.close()
            case "ppm":
                output_dir = output if output is not None else os.path.splitext(log_path)[0]
                os.makedirs(output_dir, exist_ok=True)
                for frame in frames:
                    with open(os.path.join(output_dir, f"frame_{frame.tick:04d}.ppm"), "wb") as image_file:
                        image_file.write(render_pixmap(header, frame, int(cell_size)))
                with open(os.path.join(output_dir, "legend.txt"), "w", encoding="utf-8") as legend_file:
                    legend_file.write("\n".join(legend(families)) + "\n")
                self.__logger.info(f"Frames written. output_dir={output_dir} frames={len(frames)}")
            case _:
                raise ValueError(f"Unknown frame format. format={format}")


def main() -> None:
    try:
        fire.Fire(Cli)
    except FloatingPointError as error:
        logging.getLogger(__name__).error(f"Numeric failure. {error}")
        sys.exit(EXIT_NUMERIC_FAILURE)
    except ValueError as error:
        logging.getLogger(__name__).error(f"Configuration error. {error}")
        sys.exit(EXIT_CONFIG_ERROR)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
