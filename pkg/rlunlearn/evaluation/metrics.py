"""Forget, retain and hallucination rates over sampled generations."""

import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from pydantic import BaseModel, Field

from rlunlearn.concepts.lexicon import ConceptLexicon, contains_any
from rlunlearn.environment.contexts import Context, Environment, Split, condition_resolver
from rlunlearn.errors import EmptyOutputSet, MissingExpectedConcept
from rlunlearn.evaluation.judge import Judge, JudgeVerdict, RuleBasedJudge
from rlunlearn.policy.tabular import TabularPolicy, sample_batch
from rlunlearn.utils.seeding import derive_rng
from rlunlearn.workers.pool import WorkerPool

logger = logging.getLogger(__name__)

Output = tuple[Context, Sequence[int]]


def accuracy_forget(outputs: Sequence[Output], lex: ConceptLexicon) -> float:
    """Fraction of forget-context outputs still naming the concept or a synonym.

    Raises:
        EmptyOutputSet: no outputs.
        ValueError: an output belongs to a retain context.
    """
    if not outputs:
        raise EmptyOutputSet("accuracy_forget over zero outputs")
    hits = 0
    for context, seq in outputs:
        if context.split != Split.FORGET:
            raise ValueError(f"Context {context.id} is not a forget context")
        hits += contains_any(seq, lex.penalized)
    return hits / len(outputs)


def expected_keywords(context: Context, lex: ConceptLexicon) -> frozenset[int]:
    """Retain keywords grounded in ``context`` together with their synonyms."""
    expected = context.grounded_objects & lex.retain_keywords
    if not expected:
        raise MissingExpectedConcept(f"Context {context.id} grounds no retain keyword")
    return expected | lex.synonyms_of(expected)


def accuracy_retain(outputs: Sequence[Output], lex: ConceptLexicon) -> float:
    """Fraction of retain-context outputs naming that context's own concept.

    Raises:
        EmptyOutputSet: no outputs.
        MissingExpectedConcept: a context has no expected retain keyword.
    """
    if not outputs:
        raise EmptyOutputSet("accuracy_retain over zero outputs")
    hits = 0
    for context, seq in outputs:
        hits += contains_any(seq, expected_keywords(context, lex))
    return hits / len(outputs)


class PromptMetrics(BaseModel):
    """Metrics of one prompt id; rates are None when no samples back them."""

    forget: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    retain: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    hallucination: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    retain_hallucination: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    forget_samples: int = 0
    retain_samples: int = 0


class MetricsReport(BaseModel):
    """Held-out evaluation results.

    Attributes:
        prompts: Per prompt id (as a string key) For., Ret. and Hallu.
        avg: Mean of every reported For. and Ret. cell.
        hallucination: Hallu. over all forget-context generations.
    """

    prompts: dict[str, PromptMetrics]
    avg: float
    hallucination: float
    samples_per_context: int
    temperature: float
    seed: int
    config_digest: Optional[str] = None

    def cells(self) -> list[float]:
        values = []
        for metrics in self.prompts.values():
            values.extend(v for v in (metrics.forget, metrics.retain) if v is not None)
        return values


@dataclass(frozen=True)
class GenerationRecord:
    context_id: int
    prompt_id: int
    split: Split
    tokens: tuple[int, ...]
    verdict: JudgeVerdict

    def to_dict(self, lex: ConceptLexicon) -> dict[str, Any]:
        return {
            "context_id": self.context_id,
            "prompt_id": self.prompt_id,
            "split": self.split.value,
            "tokens": lex.vocab.decode(self.tokens),
            "verdict": self.verdict.to_dict(lex),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], lex: ConceptLexicon) -> "GenerationRecord":
        return cls(
            context_id=int(data["context_id"]),
            prompt_id=int(data["prompt_id"]),
            split=Split(data["split"]),
            tokens=lex.vocab.encode(data["tokens"]),
            verdict=JudgeVerdict.from_dict(data["verdict"], lex),
        )


def _rate(count: int, total: int) -> Optional[float]:
    return count / total if total else None


def build_report(
    records: Sequence[GenerationRecord],
    env: Environment,
    lex: ConceptLexicon,
    *,
    samples_per_context: int,
    temperature: float,
    seed: int,
    config_digest: Optional[str] = None,
) -> MetricsReport:
    """Aggregate generation records into a report, in record order."""
    by_prompt: dict[int, dict[Split, list[GenerationRecord]]] = {}
    for record in records:
        by_prompt.setdefault(record.prompt_id, {Split.FORGET: [], Split.RETAIN: []})[
            record.split
        ].append(record)

    prompts: dict[str, PromptMetrics] = {}
    for prompt_id in sorted(by_prompt):
        forget = by_prompt[prompt_id][Split.FORGET]
        retain = by_prompt[prompt_id][Split.RETAIN]
        metrics = PromptMetrics(forget_samples=len(forget), retain_samples=len(retain))
        if forget:
            outputs = [(env.context(r.context_id), r.tokens) for r in forget]
            metrics.forget = 1.0 - accuracy_forget(outputs, lex)
            metrics.hallucination = _rate(sum(r.verdict.hallucinated for r in forget), len(forget))
        if retain:
            outputs = [(env.context(r.context_id), r.tokens) for r in retain]
            metrics.retain = accuracy_retain(outputs, lex)
            metrics.retain_hallucination = _rate(
                sum(r.verdict.hallucinated for r in retain), len(retain)
            )
        prompts[str(prompt_id)] = metrics

    forget_records = [r for r in records if r.split == Split.FORGET]
    if not forget_records:
        raise EmptyOutputSet("no forget-context generations to evaluate")
    report = MetricsReport(
        prompts=prompts,
        avg=0.0,
        hallucination=sum(r.verdict.hallucinated for r in forget_records) / len(forget_records),
        samples_per_context=samples_per_context,
        temperature=temperature,
        seed=seed,
        config_digest=config_digest,
    )
    cells = report.cells()
    report.avg = sum(cells) / len(cells)
    return report


def evaluate(
    policy: TabularPolicy,
    env: Environment,
    lex: ConceptLexicon,
    n_samples_per_context: int,
    seed: int,
    *,
    temperature: float = 1.0,
    judge: Optional[Judge] = None,
    granularity: str = "class",
    prompt_ids: Optional[Sequence[int]] = None,
    pool: Optional[WorkerPool] = None,
    config_digest: Optional[str] = None,
) -> tuple[MetricsReport, list[GenerationRecord]]:
    """Sample every (test context, prompt id) and score the generations.

    Each pair draws from its own ``derive_rng(seed, "eval", context, prompt)``
    stream, so results are the same for any pool size.

    Raises:
        EmptyOutputSet: the test split holds no forget contexts.
    """
    if n_samples_per_context < 1:
        raise ValueError("n_samples_per_context must be positive")
    judge = judge or RuleBasedJudge(lex)
    condition_of = condition_resolver(env, granularity)
    wanted = set(prompt_ids) if prompt_ids is not None else None
    items = [
        (ctx, pid)
        for ctx in env.test_contexts()
        for pid in ctx.prompt_ids
        if wanted is None or pid in wanted
    ]
    if not items:
        raise EmptyOutputSet("test split is empty")

    def generate(item: tuple[Context, int]) -> list[GenerationRecord]:
        ctx, pid = item
        rng = derive_rng(seed, "eval", ctx.id, pid)
        batch = sample_batch(
            policy, condition_of(ctx.id, pid), rng, n_samples_per_context, temperature
        )
        out = []
        for row in batch:
            tokens = tuple(int(t) for t in row)
            out.append(GenerationRecord(ctx.id, pid, ctx.split, tokens, judge(tokens, ctx)))
        return out

    chunks = pool.map(generate, items) if pool is not None else [generate(i) for i in items]
    records = [r for chunk in chunks for r in chunk]
    report = build_report(
        records,
        env,
        lex,
        samples_per_context=n_samples_per_context,
        temperature=temperature,
        seed=seed,
        config_digest=config_digest,
    )
    logger.info(
        f"Evaluated {len(records)} generations: Avg={report.avg:.4f} "
        f"Hallu={report.hallucination:.4f}"
    )
    return report, records
