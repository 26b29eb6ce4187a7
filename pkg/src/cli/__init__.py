"""Command-line entry point: ``python -m src.cli <command>``."""
from .commands import build_parser, main, prepare_data
from .run_config import RunConfig, load_run_config, parse_run_config

__all__ = ["build_parser", "main", "prepare_data", "RunConfig", "load_run_config", "parse_run_config"]
