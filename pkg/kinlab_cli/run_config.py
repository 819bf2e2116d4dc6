import configparser
import hashlib
import os
import re
from enum import Enum
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Self

from analytics.config import EvaluationConfig
from cmaes.config import CmaesConfig
from evdn.config import EpsilonSchedule, TrainerConfig
from kinrew.rewards import RewardConfig, RewardKind
from neural.optimizer import OptimizerConfig, OptimizerKind
from neural.spec import Architecture, NetworkSpec
from world.config import FoodLayout, ReproductionMode, WorldConfig

SETTING_FILE = "settings.ini"
OUTPUT_ROOT_ENVIRONMENT_VARIABLE = "KINLAB_OUTPUT_ROOT"

_SECTION_PATTERN = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_PATTERN = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


class ConfigError(ValueError):
    """Configuration error pointing at a line of a config file"""

    def __init__(self, message: str, path: str = "<config>", lineno: int = 0):
        self.message = message
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


@dataclass(frozen=True)
class Settings:
    """Operator defaults, read from `settings.ini`"""

    output_root: str = "runs"
    metrics_flush_every: int = 1
    workers: int = 1

    @classmethod
    def load(cls, path: str = SETTING_FILE) -> Self:
        config = configparser.ConfigParser()
        config.read(path)
        return cls(
            config.get("Output", "Root", fallback="runs"),
            config.getint("Metrics", "FlushEvery", fallback=1),
            config.getint("Workers", "Count", fallback=1),
        )


def _parse_bool(value: str) -> bool:
    match value.strip().lower():
        case "1" | "true" | "yes" | "on":
            return True
        case "0" | "false" | "no" | "off":
            return False
        case _:
            raise ValueError(f"Not a boolean. value={value}")


def _parse_optional_int(value: str) -> int | None:
    return None if value.strip().lower() in ("", "none") else int(value)


def _parse_optional_float(value: str) -> float | None:
    return None if value.strip().lower() in ("", "none", "auto") else float(value)


def _parse_widths(value: str) -> tuple[int, ...]:
    return tuple(int(width) for width in value.replace(",", " ").split())


def _render_value(value: Any) -> str:
    match value:
        case None:
            return "none"
        case bool():
            return "true" if value else "false"
        case float():
            return repr(value)
        case tuple():
            return ",".join(str(item) for item in value)
        case _:
            return str(value)


# section -> key -> parser
_SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "run": {"name": str, "seed": int, "output_dir": str},
    "world": {
        "width": int,
        "height": int,
        "endowment": float,
        "initial_health": int,
        "fertility_start": int,
        "fertility_end": int,
        "longevity": int,
        "food_growth_rate": float,
        "food_capacity": float,
        "genome_length": int,
        "reproduction_mode": ReproductionMode,
        "founder_count": int,
        "food_layout": FoodLayout.parse,
        "count_soft_cap": float,
        "mask_kinship": _parse_bool,
        "blocked_attack_family": _parse_optional_int,
    },
    "reward": {
        "kind": RewardKind,
        "gamma": float,
        "epsilon": float,
        "carrying_capacity": _parse_optional_float,
    },
    "network": {
        "architecture": Architecture,
        "hidden_widths": _parse_widths,
        "conv_channels": int,
    },
    "trainer": {
        "env_count": int,
        "train_length_min": int,
        "train_length_max": int,
        "test_length": int,
        "total_ticks": int,
        "checkpoint_interval": int,
        "workers": int,
        "epsilon_start": float,
        "epsilon_end": float,
        "epsilon_decay_ticks": int,
        "optimizer": OptimizerKind,
        "learning_rate": float,
        "beta1": float,
        "beta2": float,
        "adam_eps": float,
    },
    "cmaes": {
        "sigma0": float,
        "population_size": int,
        "generations": int,
        "episodes_per_candidate": int,
        "episode_length": int,
        "stage_switch_births": float,
        "max_dimension": int,
        "workers": int,
        "checkpoint_interval": int,
    },
    "evaluation": {
        "episodes": int,
        "length": int,
        "epsilon": float,
        "workers": int,
        "ablation_family": int,
    },
}


def _locate(lines: list[str], section: str, key: str | None = None) -> int:
    """1-based line of a section header or of a key inside it, 0 if absent"""
    current = None
    for lineno, line in enumerate(lines, start=1):
        section_match = _SECTION_PATTERN.match(line)
        if section_match is not None:
            current = section_match.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section:
            key_match = _KEY_PATTERN.match(line)
            if key_match is not None and key_match.group(1).strip().lower() == key:
                return lineno
    return 0


@dataclass(frozen=True)
class RunConfig:
    """Run Configuration

    Every section of the config file maps onto one configuration dataclass.
    `[run] seed` seeds the world, the trainers and the evaluation.
    """

    name: str = "run"
    seed: int = 0
    output_dir: str = ""
    world: WorldConfig = field(default_factory=WorldConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    cmaes: CmaesConfig = field(default_factory=CmaesConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    @classmethod
    def parse(cls, text: str, path: str = "<config>") -> Self:
        """Parse a config file

        Args:
            text (str): INI text
            path (str, optional): Path used in diagnostics

        Raises:
            ConfigError: Syntax error, unknown section or key, bad value or invalid configuration

        Returns:
            Self: Instance of this class
        """
        lines = text.splitlines()
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=path)
        except configparser.MissingSectionHeaderError as error:
            raise ConfigError("Missing section header.", path, error.lineno) from error
        except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as error:
            raise ConfigError(error.message, path, error.lineno or 0) from error
        except configparser.ParsingError as error:
            lineno = error.errors[0][0] if len(error.errors) > 0 else 0
            raise ConfigError("Malformed line.", path, lineno) from error

        values: dict[str, dict[str, Any]] = {section: {} for section in _SCHEMA}
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigError(f"Unknown section. section={section}", path, _locate(lines, section))
            for key, raw in parser.items(section):
                lineno = _locate(lines, section, key)
                if key not in _SCHEMA[section]:
                    raise ConfigError(f"Unknown key. section={section} key={key}", path, lineno)
                try:
                    values[section][key] = _SCHEMA[section][key](raw.strip())
                except ValueError as error:
                    raise ConfigError(
                        f"Invalid value. section={section} key={key} value={raw.strip()} ({error})",
                        path,
                        lineno,
                    ) from error

        config = cls.__compose(values)
        for section, validate in config.__validators():
            try:
                validate()
            except ValueError as error:
                raise ConfigError(str(error), path, _locate(lines, section)) from error
        return config

    @classmethod
    def load(cls, path: str) -> Self:
        """Load a config file

        Raises:
            ConfigError: Missing file or invalid configuration
        """
        if not os.path.isfile(path):
            raise ConfigError("Config file not found.", path, 0)
        with open(path, "r", encoding="utf-8") as config_file:
            return cls.parse(config_file.read(), path)

    @classmethod
    def __compose(cls, values: dict[str, dict[str, Any]]) -> Self:
        run = values["run"]
        seed = run.get("seed", 0)
        world = replace(WorldConfig(), seed=seed, **values["world"])
        reward = replace(RewardConfig(), **values["reward"])

        network_values = values["network"]
        architecture = network_values.get("architecture", Architecture.SMALL_CONV)
        network = replace(NetworkSpec.default(architecture), **network_values)

        trainer_values = dict(values["trainer"])
        epsilon = EpsilonSchedule(
            trainer_values.pop("epsilon_start", 1.0),
            trainer_values.pop("epsilon_end", 0.05),
            trainer_values.pop("epsilon_decay_ticks", 100_000),
        )
        optimizer = OptimizerConfig(
            trainer_values.pop("optimizer", OptimizerKind.ADAM),
            trainer_values.pop("learning_rate", 1e-4),
            trainer_values.pop("beta1", 0.9),
            trainer_values.pop("beta2", 0.999),
            trainer_values.pop("adam_eps", 1e-8),
        )
        trainer = replace(
            TrainerConfig(),
            seed=seed,
            epsilon=epsilon,
            reward=reward,
            optimizer=optimizer,
            **trainer_values,
        )
        cmaes = replace(CmaesConfig(), seed=seed, **values["cmaes"])
        evaluation = replace(EvaluationConfig(), seed=seed, **values["evaluation"])
        return cls(
            run.get("name", "run"),
            seed,
            run.get("output_dir", ""),
            world,
            reward,
            network,
            trainer,
            cmaes,
            evaluation,
        )

    def __validators(self) -> list[tuple[str, Callable[[], None]]]:
        return [
            ("world", self.world.validate),
            ("reward", self.reward.validate),
            ("network", self.network.validate),
            ("trainer", self.trainer.validate),
            ("cmaes", self.cmaes.validate),
            ("evaluation", self.evaluation.validate),
        ]

    def validate(self) -> None:
        for _, validate in self.__validators():
            validate()

    def sections(self) -> dict[str, dict[str, Any]]:
        """Resolved value of every documented key, by section"""
        trainer = self.trainer
        return {
            "run": {"name": self.name, "seed": self.seed, "output_dir": self.output_dir},
            "world": {
                key: (
                    getattr(self.world, key).descriptor()
                    if key == "food_layout"
                    else getattr(self.world, key)
                )
                for key in _SCHEMA["world"]
            },
            "reward": {key: getattr(self.reward, key) for key in _SCHEMA["reward"]},
            "network": {key: getattr(self.network, key) for key in _SCHEMA["network"]},
            "trainer": {
                "env_count": trainer.env_count,
                "train_length_min": trainer.train_length_min,
                "train_length_max": trainer.train_length_max,
                "test_length": trainer.test_length,
                "total_ticks": trainer.total_ticks,
                "checkpoint_interval": trainer.checkpoint_interval,
                "workers": trainer.workers,
                "epsilon_start": trainer.epsilon.start,
                "epsilon_end": trainer.epsilon.end,
                "epsilon_decay_ticks": trainer.epsilon.decay_ticks,
                "optimizer": trainer.optimizer.kind,
                "learning_rate": trainer.optimizer.learning_rate,
                "beta1": trainer.optimizer.beta1,
                "beta2": trainer.optimizer.beta2,
                "adam_eps": trainer.optimizer.eps,
            },
            "cmaes": {key: getattr(self.cmaes, key) for key in _SCHEMA["cmaes"]},
            "evaluation": {key: getattr(self.evaluation, key) for key in _SCHEMA["evaluation"]},
        }

    def render(self) -> str:
        """Canonical INI rendering; parsing it gives back an equal configuration"""
        lines: list[str] = []
        for section, entries in self.sections().items():
            lines.append(f"[{section}]")
            for key, value in entries.items():
                if isinstance(value, Enum):
                    value = value.value
                lines.append(f"{key} = {_render_value(value)}")
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.render().encode("utf-8")).hexdigest()

    def output_root(self, settings: Settings | None = None) -> str:
        """Environment variable, then `[run] output_dir`, then `settings.ini`"""
        from_environment = os.environ.get(OUTPUT_ROOT_ENVIRONMENT_VARIABLE, "")
        if from_environment != "":
            return from_environment
        if self.output_dir != "":
            return self.output_dir
        return (Settings.load() if settings is None else settings).output_root

    def run_directory(self, settings: Settings | None = None) -> str:
        return os.path.join(self.output_root(settings), f"{self.name}-{self.config_hash()[:12]}")
