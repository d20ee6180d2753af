"""Pipeline stages.

Every stage reads its inputs from, and writes its outputs to, the run
directory, so any stage can be rerun on its own from the artifacts of the
previous ones.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Optional

from rlunlearn.concepts.lexicon import ConceptLexicon, LexiconSpec, build_lexicon
from rlunlearn.config import ExperimentConfig
from rlunlearn.environment.contexts import Environment, Split, condition_resolver
from rlunlearn.environment.contexts import generate_environment as _generate_environment
from rlunlearn.environment.corpus import (
    Corpus,
    build_coldstart_corpus,
    generate_abstraction_corpus,
    generate_reference_corpus,
)
from rlunlearn.errors import MissingArtifact, PreconditionViolated
from rlunlearn.evaluation.judge import Judge, RuleBasedJudge, SubprocessJudge
from rlunlearn.evaluation.metrics import MetricsReport, evaluate
from rlunlearn.evaluation.table import render_table
from rlunlearn.oracle.closed_form import hallucination_spec_for, verify_lemma1
from rlunlearn.oracle.sweep import lambda_sweep, lemma_sweep
from rlunlearn.pipeline.registry import stage
from rlunlearn.policy.checkpoint import load_policy, save_policy
from rlunlearn.policy.mle import fit_mle
from rlunlearn.policy.tabular import TabularPolicy, init_policy
from rlunlearn.training.grpo import train
from rlunlearn.utils.seeding import derive_rng, mix
from rlunlearn.utils.serializer import ArtifactSerializer
from rlunlearn.workers.pool import WorkerPool

logger = logging.getLogger(__name__)

ENV = "env.json"
REFERENCE = "reference.jsonl"
ABSTRACTION = "abstraction.jsonl"
COLDSTART = "coldstart.jsonl"
POLICY_BASE = "policy_base.ckpt"
POLICY_COLD = "policy_cold.ckpt"
TRAINLOG = "trainlog.jsonl"
ROLLOUTS = "rollouts.jsonl"
POLICY_FINAL = "policy_final.ckpt"
GENERATIONS = "generations.jsonl"
METRICS = "metrics.json"
LEMMA = "lemma.json"
REPORT = "report.txt"
MANIFEST = "run_manifest.json"


def load_lexicon(config: ExperimentConfig) -> ConceptLexicon:
    spec = LexiconSpec.from_file(config.lexicon) if config.lexicon else LexiconSpec.preset()
    return build_lexicon(spec)


@dataclass
class RunContext:
    """Everything a stage needs: config, run directory and worker pool."""

    config: ExperimentConfig
    out_dir: Path
    pool: Optional[WorkerPool] = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @cached_property
    def lexicon(self) -> ConceptLexicon:
        return load_lexicon(self.config)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def require(self, name: str) -> Path:
        path = self.path(name)
        if not path.exists():
            raise MissingArtifact(path)
        return path

    def environment(self) -> Environment:
        return Environment.from_dict(ArtifactSerializer.read(self.require(ENV)), self.lexicon)

    def policy(self, name: str) -> TabularPolicy:
        return load_policy(self.require(name), self.lexicon.vocab)

    def start_policy_name(self) -> str:
        return POLICY_BASE if self.config.train.skip_coldstart else POLICY_COLD

    def reference_policy_name(self) -> str:
        if self.config.train.reference == "base":
            return POLICY_BASE
        return self.start_policy_name()

    def write_corpus(self, name: str, corpus: Corpus) -> None:
        ArtifactSerializer.write_lines(self.path(name), corpus.to_lines(self.lexicon.vocab))


@stage("gen-env", produces=(ENV,))
def generate_environment(run: RunContext) -> None:
    env = _generate_environment(
        run.config.environment, run.lexicon, derive_rng(run.seed, "environment")
    )
    ArtifactSerializer.write(run.path(ENV), env.to_dict())


def _record_condition(run: RunContext, env: Environment):
    resolve = condition_resolver(env, run.config.policy.granularity)
    return lambda record: resolve(record.context_id, record.prompt_id)


@stage(
    "coldstart",
    requires=(ENV,),
    produces=(REFERENCE, ABSTRACTION, POLICY_BASE, COLDSTART, POLICY_COLD),
)
def coldstart(run: RunContext) -> None:
    """Pretrain the base policy, then fit it to the keyword-replaced corpus."""
    cfg = run.config
    lex = run.lexicon
    env = run.environment()
    templates = cfg.environment.templates
    length = cfg.policy.length
    reference = generate_reference_corpus(
        env,
        templates,
        run.seed,
        length=length,
        captions_per_prompt=cfg.environment.captions_per_prompt,
    )
    abstraction = generate_abstraction_corpus(
        env,
        templates,
        run.seed,
        length=length,
        captions_per_prompt=cfg.environment.abstraction_captions_per_prompt,
    )
    run.write_corpus(REFERENCE, reference)
    run.write_corpus(ABSTRACTION, abstraction)

    condition_of = _record_condition(run, env)
    init = init_policy(
        lex.vocab,
        env.conditions(cfg.policy.granularity),
        length,
        cfg.policy.init_scale,
        derive_rng(run.seed, "init"),
        cfg.policy.history,
    )
    base, _ = fit_mle(
        init,
        reference.merged(abstraction),
        cfg.coldstart.pretrain_lr,
        cfg.coldstart.pretrain_epochs,
        condition_of=condition_of,
    )
    save_policy(base, run.path(POLICY_BASE))

    pool = None
    if cfg.coldstart.retain_pool is not None:
        pool = [lex.vocab.id_of(name) for name in cfg.coldstart.retain_pool]
    scrubbed = build_coldstart_corpus(env, reference, lex, run.seed, pool)
    run.write_corpus(COLDSTART, scrubbed)
    cold, _ = fit_mle(
        base, scrubbed, cfg.coldstart.lr, cfg.coldstart.epochs, condition_of=condition_of
    )
    save_policy(cold, run.path(POLICY_COLD))


@stage(
    "train",
    requires=(ENV, POLICY_BASE, POLICY_COLD),
    produces=(TRAINLOG, POLICY_FINAL),
    parallel=True,
)
def train_policy(run: RunContext) -> None:
    cfg = run.config
    env = run.environment()
    start = run.policy(run.start_policy_name())
    reference = run.policy(run.reference_policy_name())
    rollouts: list[dict[str, Any]] = []
    final, log = train(
        env,
        start,
        run.lexicon,
        cfg.effective_rewards(),
        cfg.train,
        reference=reference,
        granularity=cfg.policy.granularity,
        seed=run.seed,
        pool=run.pool,
        rollout_sink=rollouts.append if cfg.train.log_rollouts else None,
    )
    log.meta["reference"] = run.reference_policy_name()
    log.write(run.path(TRAINLOG))
    if cfg.train.log_rollouts:
        ArtifactSerializer.write_lines(run.path(ROLLOUTS), rollouts)
    save_policy(final, run.path(POLICY_FINAL))


def build_judge(run: RunContext) -> Judge:
    evaluation = run.config.evaluation
    if evaluation.judge == "subprocess":
        return SubprocessJudge(evaluation.judge_command, run.lexicon)
    return RuleBasedJudge(run.lexicon)


@stage("eval", requires=(ENV, POLICY_FINAL), produces=(GENERATIONS, METRICS), parallel=True)
def evaluate_policy(run: RunContext) -> None:
    cfg = run.config
    report, records = evaluate(
        run.policy(POLICY_FINAL),
        run.environment(),
        run.lexicon,
        cfg.evaluation.samples_per_context,
        mix(run.seed, "eval"),
        temperature=cfg.evaluation.temperature,
        judge=build_judge(run),
        granularity=cfg.policy.granularity,
        prompt_ids=cfg.evaluation.prompt_ids,
        pool=run.pool,
        config_digest=cfg.digest(),
    )
    ArtifactSerializer.write_lines(
        run.path(GENERATIONS), [r.to_dict(run.lexicon) for r in records]
    )
    ArtifactSerializer.write(run.path(METRICS), report)


def forget_conditions(env: Environment, granularity: str) -> dict[str, frozenset[int]]:
    """Condition key of every forget context mapped to its grounded objects."""
    resolve = condition_resolver(env, granularity)
    out: dict[str, frozenset[int]] = {}
    for ctx in env.contexts:
        if ctx.split != Split.FORGET:
            continue
        for pid in ctx.prompt_ids:
            out.setdefault(resolve(ctx.id, pid), ctx.grounded_objects)
    return dict(sorted(out.items()))


@stage(
    "lemma-verify",
    requires=(ENV, POLICY_COLD),
    produces=(LEMMA,),
    parallel=True,
    enabled=lambda cfg: cfg.lemma.enabled,
)
def verify_lemma(run: RunContext) -> dict[str, Any]:
    """Check the bound on the RL reference policy and on random instances."""
    cfg = run.config
    lemma = cfg.lemma
    lex = run.lexicon
    lambda1 = lemma.lambda1 if lemma.lambda1 is not None else cfg.rewards.lambda1
    lambda2 = lemma.lambda2 if lemma.lambda2 is not None else cfg.rewards.lambda2
    ref = run.policy(run.reference_policy_name())
    env = run.environment()

    conditions = []
    failures = []
    curve: list[dict[str, Any]] = []
    if lambda1 > 0 and lambda2 > 0:
        for condition, grounded in forget_conditions(env, cfg.policy.granularity).items():
            spec = hallucination_spec_for(lex, grounded)
            try:
                report = verify_lemma1(
                    ref,
                    condition,
                    lex,
                    spec,
                    lambda1,
                    lambda2,
                    lemma.beta,
                    cap=cfg.policy.enumeration_cap,
                    seed=run.seed,
                )
                conditions.append(report.model_dump(mode="json"))
            except PreconditionViolated as e:
                logger.warning(f"Lemma precondition fails for {condition}: {e}")
                failures.append({"condition": condition, "reason": str(e)})
            if not curve:
                points = lambda_sweep(
                    ref,
                    condition,
                    lex,
                    spec,
                    lambda1,
                    lemma.lambda_grid,
                    lemma.beta,
                    cap=cfg.policy.enumeration_cap,
                )
                curve = [{"condition": condition, **p.model_dump()} for p in points]
    else:
        logger.warning("Lemma check on the reference policy needs positive lambda1 and lambda2")

    _, summary = lemma_sweep(
        lemma.instances,
        mix(run.seed, "lemma-sweep"),
        beta=lemma.beta,
        max_vocab=lemma.max_vocab,
        max_length=lemma.max_length,
        pool=run.pool,
    )
    payload = {
        "conditions": conditions,
        "precondition_failures": failures,
        "lambda_sweep": curve,
        "sweep": summary.model_dump(mode="json"),
    }
    ArtifactSerializer.write(run.path(LEMMA), payload)
    return payload


@stage("report", requires=(METRICS,), produces=(REPORT,))
def write_report(run: RunContext) -> str:
    metrics = MetricsReport.model_validate(ArtifactSerializer.read(run.require(METRICS)))
    lemma_path = run.path(LEMMA)
    lemma = ArtifactSerializer.read(lemma_path) if lemma_path.exists() else None
    text = render_table(metrics, lemma)
    run.path(REPORT).write_text(text, encoding="utf-8")
    return text
