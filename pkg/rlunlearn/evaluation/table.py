"""Plain-text rendering of evaluation and lemma results."""

from typing import Any, Optional

from rlunlearn.evaluation.metrics import MetricsReport


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{100.0 * value:.2f}"


def render_table(metrics: MetricsReport, lemma: Optional[dict[str, Any]] = None) -> str:
    """For./Ret. per prompt id, Avg and Hallu. in percent, then the lemma summary."""
    prompt_ids = sorted(metrics.prompts, key=int)
    header = []
    for pid in prompt_ids:
        header += [f"For.(p{pid})", f"Ret.(p{pid})"]
    header += ["Avg", "Hallu."]
    row = []
    for pid in prompt_ids:
        row += [_pct(metrics.prompts[pid].forget), _pct(metrics.prompts[pid].retain)]
    row += [_pct(metrics.avg), _pct(metrics.hallucination)]
    widths = [max(len(h), len(v)) for h, v in zip(header, row)]

    lines = [
        " | ".join(h.rjust(w) for h, w in zip(header, widths)),
        "-+-".join("-" * w for w in widths),
        " | ".join(v.rjust(w) for v, w in zip(row, widths)),
        "",
        "Hallu. per prompt: "
        + ", ".join(f"p{pid}={_pct(metrics.prompts[pid].hallucination)}" for pid in prompt_ids),
        f"seed={metrics.seed} samples/context={metrics.samples_per_context} "
        f"temperature={metrics.temperature}",
    ]
    if lemma:
        sweep = lemma.get("sweep")
        if sweep:
            checked = sweep["instances"] - sweep["precondition_failures"]
            lines.append(f"Lemma sweep: {sweep['holds']}/{checked} hold")
        conditions = lemma.get("conditions") or []
        if conditions:
            holds = sum(1 for c in conditions if c.get("verdict"))
            lines.append(f"Lemma on reference policy: {holds}/{len(conditions)} conditions hold")
    return "\n".join(lines) + "\n"
