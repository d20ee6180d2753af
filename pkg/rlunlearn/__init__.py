"""rlunlearn - reinforcement unlearning with hallucination-aware keyword rewards."""

__version__ = "0.1.0"

from rlunlearn.config import ExperimentConfig, load_config
from rlunlearn.pipeline.runner import run_pipeline, run_stage

__all__ = ["ExperimentConfig", "load_config", "run_pipeline", "run_stage", "__version__"]
