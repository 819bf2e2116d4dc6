from .run_config import ConfigError, RunConfig, Settings
