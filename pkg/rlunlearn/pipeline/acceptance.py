"""Built-in acceptance checks behind ``rlunlearn verify``."""

import logging
import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel

from rlunlearn.concepts.lexicon import LexiconSpec, Vocabulary, build_lexicon
from rlunlearn.config import ExperimentConfig, TrainConfig
from rlunlearn.environment.contexts import Split
from rlunlearn.errors import AcceptanceFailed, RLUnlearnError
from rlunlearn.evaluation.audit import audit_report, recount_metrics
from rlunlearn.evaluation.metrics import MetricsReport
from rlunlearn.oracle.closed_form import HallucinationSpec, verify_lemma1
from rlunlearn.oracle.sweep import lemma_sweep
from rlunlearn.pipeline.stages import (
    GENERATIONS,
    METRICS,
    POLICY_BASE,
    POLICY_COLD,
    RunContext,
    forget_conditions,
)
from rlunlearn.policy.distribution import EnumeratedDistribution
from rlunlearn.policy.tabular import containment_probability, init_policy, sample_batch
from rlunlearn.training.grpo import Group, batch_states, compute_advantages, surrogate_and_gradient
from rlunlearn.utils.seeding import derive_rng
from rlunlearn.utils.serializer import ArtifactSerializer
from rlunlearn.workers.pool import ordered_map

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str


def check_lemma_sweep(seed: int, instances: int = 200) -> CheckResult:
    _, summary = lemma_sweep(instances, seed)
    ok = summary.checked > 0 and summary.all_hold
    ok = ok and (summary.min_z_margin or 0.0) > 0 and (summary.min_p_margin or 0.0) > 0
    return CheckResult(
        name="lemma-sweep",
        passed=ok,
        detail=f"{summary.line()}, {summary.precondition_failures} precondition failures",
    )


def minimal_instance():
    """Length-1 sequences over {dog, animal, cat} with a uniform reference."""
    lex = build_lexicon(
        LexiconSpec(
            vocabulary=["dog", "animal", "cat"],
            forget=["dog"],
            hypernyms={"dog": ["animal"]},
            retain=["cat"],
        )
    )
    ids = [lex.vocab.id_of(n) for n in ("dog", "animal", "cat")]
    ref = EnumeratedDistribution.from_mapping({(t,): 1.0 / 3.0 for t in ids})
    spec = HallucinationSpec(frozenset({ids[2]}), frozenset({ids[0]}))
    return lex, ref, spec


def check_minimal_instance() -> CheckResult:
    lex, ref, spec = minimal_instance()
    report = verify_lemma1(ref, "x", lex, spec, 1.0, 1.0, 1.0)
    want_pen = 1.0 / (math.exp(-1) + 2.0)
    want_comp = 1.0 / (math.exp(-1) + math.e + 1.0)
    err = max(abs(report.p_hallu_pen - want_pen), abs(report.p_hallu_comp - want_comp))
    return CheckResult(
        name="minimal-instance",
        passed=report.verdict and err < 1e-12,
        detail=f"P_pen={report.p_hallu_pen:.12f} P_comp={report.p_hallu_comp:.12f} err={err:.2e}",
    )


def random_surrogate_case(seed: int, index: int):
    """Small random (current, behavior, reference, groups, config) for gradient checks."""
    rng = derive_rng(seed, "gradcheck", index)
    vocab = Vocabulary.from_names([f"w{i}" for i in range(int(rng.integers(3, 6)))])
    conditions = ["a", "b"]
    length = int(rng.integers(1, 4))
    current = init_policy(vocab, conditions, length, 1.0, rng)
    behavior = current.with_logits(current.logits + rng.normal(0.0, 0.1, current.logits.shape))
    reference = init_policy(vocab, conditions, length, 1.0, rng)
    cfg = TrainConfig(
        beta=float(rng.choice([0.0, 0.01, 0.5])),
        clip_eps=0.2,
        kl_estimator="k3" if rng.random() < 0.5 else "exact",
    )
    groups = []
    for g in range(int(rng.integers(1, 4))):
        condition = conditions[g % 2]
        seqs = sample_batch(behavior, condition, rng, 4)
        rows = behavior.rows(condition)
        rewards = rng.normal(size=4)
        groups.append(
            Group(
                context_id=g,
                prompt_id=0,
                condition=condition,
                sequences=seqs,
                behavior_log_probs=rows[batch_states(behavior, seqs), seqs],
                rewards=rewards,
                advantages=compute_advantages(rewards),
            )
        )
    return current, behavior, reference, groups, cfg


def gradient_error(seed: int, index: int, h: float = 1e-5, coords: int = 20) -> float:
    """Max-norm relative error of the analytic surrogate gradient against central differences."""
    current, behavior, reference, groups, cfg = random_surrogate_case(seed, index)
    _, grad = surrogate_and_gradient(current, behavior, reference, groups, cfg)
    rng = derive_rng(seed, "gradcheck-coords", index)
    c, s, v = current.logits.shape
    picks = [
        (int(rng.integers(c)), int(rng.integers(s)), int(rng.integers(1, v)))
        for _ in range(coords)
    ]
    analytic, numeric = [], []
    for idx in picks:
        bumped = current.logits.copy()
        bumped[idx] += h
        up, _ = surrogate_and_gradient(
            current.with_logits(bumped), behavior, reference, groups, cfg
        )
        bumped[idx] -= 2 * h
        down, _ = surrogate_and_gradient(
            current.with_logits(bumped), behavior, reference, groups, cfg
        )
        analytic.append(grad[idx])
        numeric.append((up - down) / (2 * h))
    analytic_arr, numeric_arr = np.array(analytic), np.array(numeric)
    scale = max(float(np.abs(numeric_arr).max()), 1e-8)
    return float(np.abs(analytic_arr - numeric_arr).max()) / scale


def check_gradients(
    seed: int, instances: int = 50, concurrency: Optional[int] = None
) -> CheckResult:
    errors = ordered_map(lambda i: gradient_error(seed, i), range(instances), concurrency)
    worst = max(errors)
    return CheckResult(
        name="surrogate-gradient",
        passed=worst < 1e-5,
        detail=f"max relative error {worst:.2e} over {instances} instances",
    )


def check_advantages(seed: int, groups: int = 1000) -> CheckResult:
    rng = derive_rng(seed, "advantages")
    worst_mean = 0.0
    for _ in range(groups):
        j = int(rng.integers(2, 9))
        adv = compute_advantages(rng.normal(size=j))
        worst_mean = max(worst_mean, abs(float(adv.mean())))
    equal_ok = not np.any(compute_advantages([0.7] * 5))
    first = compute_advantages([1, 0, 0, 0, 0])[0]
    first_ok = abs(first - 0.8 / (0.4 + 1e-6)) < 1e-9
    return CheckResult(
        name="advantages",
        passed=worst_mean < 1e-9 and equal_ok and first_ok,
        detail=f"max |mean|={worst_mean:.2e} equal-group-zero={equal_ok} A1={first:.9f}",
    )


def _metrics(out_dir: Path) -> MetricsReport:
    return MetricsReport.model_validate(ArtifactSerializer.read(out_dir / METRICS))


def check_training(out_dir: Path, threshold: float = 0.95) -> CheckResult:
    metrics = _metrics(out_dir)
    cells = {
        f"{name}(p{pid})": value
        for pid, m in metrics.prompts.items()
        for name, value in (("For.", m.forget), ("Ret.", m.retain))
        if value is not None
    }
    low = {k: v for k, v in cells.items() if v < threshold}
    return CheckResult(
        name="training",
        passed=bool(cells) and not low,
        detail=f"below {threshold}: {low}" if low else f"all {len(cells)} cells >= {threshold}",
    )


def check_hallucination(
    out_dir: Path, baseline_dir: Optional[Path] = None, ceiling: float = 0.02
) -> CheckResult:
    hallu = _metrics(out_dir).hallucination
    passed = hallu <= ceiling
    detail = f"Hallu.={hallu:.4f}"
    if baseline_dir is not None:
        base = _metrics(baseline_dir).hallucination
        detail += f" baseline={base:.4f}"
        if base > ceiling:
            passed = passed and hallu < base
    return CheckResult(name="hallucination", passed=passed, detail=detail)


def check_coldstart(run: RunContext) -> CheckResult:
    env = run.environment()
    lex = run.lexicon
    base = run.policy(POLICY_BASE)
    cold = run.policy(POLICY_COLD)
    conditions = list(forget_conditions(env, run.config.policy.granularity))
    before = np.mean([containment_probability(base, c, lex.penalized) for c in conditions])
    after = np.mean([containment_probability(cold, c, lex.penalized) for c in conditions])
    return CheckResult(
        name="coldstart",
        passed=bool(after <= 0.5 * before),
        detail=f"forget-token mass {before:.4f} -> {after:.4f}",
    )


def check_recount(run: RunContext) -> CheckResult:
    env = run.environment()
    lines = ArtifactSerializer.read_lines(run.require(GENERATIONS))
    if not any(line["split"] == Split.FORGET.value for line in lines):
        return CheckResult(
            name="metric-recount", passed=False, detail="no forget-context generations logged"
        )
    problems = audit_report(_metrics(run.out_dir), recount_metrics(lines, env, run.lexicon))
    return CheckResult(
        name="metric-recount",
        passed=not problems,
        detail="; ".join(problems) if problems else f"{len(lines)} generations agree",
    )


def run_checks(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    baseline_dir: Optional[Path] = None,
) -> list[CheckResult]:
    """Analytic checks always; run checks when ``out_dir`` holds a finished run."""
    checks: list[tuple[str, Callable[[], CheckResult]]] = [
        ("lemma-sweep", lambda: check_lemma_sweep(config.seed, max(200, config.lemma.instances))),
        ("minimal-instance", check_minimal_instance),
        (
            "surrogate-gradient",
            lambda: check_gradients(config.seed, concurrency=config.resolved_concurrency()),
        ),
        ("advantages", lambda: check_advantages(config.seed)),
    ]
    if out_dir is not None:
        run = RunContext(config, Path(out_dir))
        checks += [
            ("coldstart", lambda: check_coldstart(run)),
            ("training", lambda: check_training(run.out_dir)),
            ("hallucination", lambda: check_hallucination(run.out_dir, baseline_dir)),
            ("metric-recount", lambda: check_recount(run)),
        ]
    results = []
    for name, check in checks:
        try:
            result = check()
        except RLUnlearnError as e:
            result = CheckResult(name=name, passed=False, detail=str(e))
        logger.info(f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.detail}")
        results.append(result)
    return results


def run_acceptance(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    baseline_dir: Optional[Path] = None,
) -> list[CheckResult]:
    """Run every check.

    Raises:
        AcceptanceFailed: at least one check did not pass; carries all results.
    """
    results = run_checks(config, out_dir, baseline_dir)
    if not all(r.passed for r in results):
        raise AcceptanceFailed(results)
    return results
