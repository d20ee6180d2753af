"""Main module for rlunlearn."""

from rlunlearn.concepts.lexicon import ConceptLexicon, LexiconSpec, build_lexicon
from rlunlearn.config import ExperimentConfig, load_config
from rlunlearn.evaluation.metrics import evaluate
from rlunlearn.oracle.closed_form import verify_lemma1
from rlunlearn.oracle.sweep import lemma_sweep
from rlunlearn.pipeline.registry import stage, stage_registry
from rlunlearn.pipeline.runner import PipelineRunner, run_pipeline, run_stage
from rlunlearn.policy.tabular import TabularPolicy
from rlunlearn.training.grpo import train

__all__ = [
    "ConceptLexicon",
    "ExperimentConfig",
    "LexiconSpec",
    "PipelineRunner",
    "TabularPolicy",
    "build_lexicon",
    "evaluate",
    "lemma_sweep",
    "load_config",
    "run_pipeline",
    "run_stage",
    "stage",
    "stage_registry",
    "train",
    "verify_lemma1",
]
