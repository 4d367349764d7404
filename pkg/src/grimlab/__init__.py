"""Learning-progress goal-region sampling on a small pixel playground."""
from .config import ExperimentConfig, load_config
from .env import PlaygroundRGB
from .harness import RunResult, run_experiment

__all__ = ["ExperimentConfig", "PlaygroundRGB", "RunResult", "load_config", "run_experiment"]
__version__ = "0.1.0"
