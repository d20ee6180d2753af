"""Brute-force recount of evaluation metrics from the generation log.

Works on the logged token strings only and re-derives every rule from the
lexicon names, so it shares no code path with :mod:`rlunlearn.evaluation.metrics`.
"""

from typing import Any, Iterable, Optional

from rlunlearn.concepts.lexicon import ConceptLexicon
from rlunlearn.environment.contexts import Environment
from rlunlearn.evaluation.metrics import MetricsReport


def _names(lex: ConceptLexicon, ids: Iterable[int]) -> set[str]:
    return {lex.vocab.name_of(t) for t in ids}


def _hallucinated(tokens: list[str], allowed: set[str], objects: set[str], hedges: set[str]) -> bool:
    for i, tok in enumerate(tokens):
        if tok in objects and tok not in allowed and not hedges.intersection(tokens[:i]):
            return True
    return False


def recount_metrics(
    lines: Iterable[dict[str, Any]], env: Environment, lex: ConceptLexicon
) -> dict[str, dict[str, Optional[float]]]:
    """Per prompt id: forget, retain and hallucination rates from scratch."""
    forget_words = _names(lex, lex.forget_keywords)
    for concept in lex.forget_keywords:
        forget_words |= _names(lex, lex.synonyms.get(concept, ()))
    objects = _names(lex, lex.object_tokens)
    hedges = _names(lex, lex.hedge_tokens)
    forget_hypernyms = set()
    for concept in lex.forget_keywords:
        forget_hypernyms |= _names(lex, lex.hypernyms.get(concept, ()))

    tallies: dict[int, dict[str, int]] = {}
    for line in lines:
        ctx = env.context(int(line["context_id"]))
        tokens = list(line["tokens"])
        grounded = _names(lex, ctx.grounded_objects)
        allowed = set(grounded) | forget_hypernyms
        for concept in ctx.grounded_objects:
            allowed |= _names(lex, lex.synonyms.get(concept, ()))
            allowed |= _names(lex, lex.hypernyms.get(concept, ()))
        t = tallies.setdefault(
            int(line["prompt_id"]), {"fn": 0, "fhit": 0, "fh": 0, "rn": 0, "rhit": 0}
        )
        if line["split"] == "forget":
            t["fn"] += 1
            t["fhit"] += any(tok in forget_words for tok in tokens)
            t["fh"] += _hallucinated(tokens, allowed, objects, hedges)
        else:
            expected = grounded & _names(lex, lex.retain_keywords)
            for concept in ctx.grounded_objects & lex.retain_keywords:
                expected |= _names(lex, lex.synonyms.get(concept, ()))
            t["rn"] += 1
            t["rhit"] += any(tok in expected for tok in tokens)

    result = {}
    for prompt_id in sorted(tallies):
        t = tallies[prompt_id]
        result[str(prompt_id)] = {
            "forget": 1.0 - t["fhit"] / t["fn"] if t["fn"] else None,
            "retain": t["rhit"] / t["rn"] if t["rn"] else None,
            "hallucination": t["fh"] / t["fn"] if t["fn"] else None,
        }
    return result


def audit_report(
    report: MetricsReport, recount: dict[str, dict[str, Optional[float]]]
) -> list[str]:
    """Mismatches between a report and a recount; empty when they agree exactly."""
    problems = []
    if set(report.prompts) != set(recount):
        problems.append(f"prompt ids differ: {sorted(report.prompts)} vs {sorted(recount)}")
    for prompt_id in sorted(set(report.prompts) & set(recount)):
        metrics = report.prompts[prompt_id]
        for name, value in recount[prompt_id].items():
            reported = getattr(metrics, name)
            if reported != value:
                problems.append(f"prompt {prompt_id} {name}: report {reported} recount {value}")
    return problems
