# Utils package initializer
from .logger import get_logger, setup_logging, StageLogger

__all__ = ["get_logger", "setup_logging", "StageLogger"]
