"""Metrics and hallucination judging."""

from rlunlearn.evaluation.audit import audit_report, recount_metrics
from rlunlearn.evaluation.judge import (
    Certainty,
    Judge,
    JudgeVerdict,
    RuleBasedJudge,
    SubprocessJudge,
)
from rlunlearn.evaluation.metrics import (
    GenerationRecord,
    MetricsReport,
    PromptMetrics,
    accuracy_forget,
    accuracy_retain,
    evaluate,
)
from rlunlearn.evaluation.table import render_table

__all__ = [
    "Certainty",
    "GenerationRecord",
    "Judge",
    "JudgeVerdict",
    "MetricsReport",
    "PromptMetrics",
    "RuleBasedJudge",
    "SubprocessJudge",
    "accuracy_forget",
    "accuracy_retain",
    "audit_report",
    "evaluate",
    "recount_metrics",
    "render_table",
]
