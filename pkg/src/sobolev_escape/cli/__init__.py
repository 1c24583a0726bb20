"""Command-line interface: JSON-configured runs of the four pipelines."""
from .commands import COMMANDS, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFICATION
from .config import ConfigError, load_config, resolve_config
from .main import build_parser, main, run

__all__ = ["COMMANDS", "ConfigError", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_OK", "EXIT_VERIFICATION",
           "build_parser", "load_config", "main", "resolve_config", "run"]
