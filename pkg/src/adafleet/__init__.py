"""adafleet: adaptive ride-pooling fleet simulation with context-switching Q-learning."""

from .citygrid import GridCoord, TravelModel
from .config import Config, load_config, parse_config
from .simcore import run

__all__ = ["Config", "GridCoord", "TravelModel", "load_config", "parse_config", "run"]
__version__ = "0.1.0"
