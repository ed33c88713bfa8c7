"""Shared helpers for the test suite."""

from __future__ import annotations

from temposcore import EvalReport

GARBAGE_PREDICTION = "uh, somewhere near the start probably??"


def collect_metrics(report: EvalReport) -> dict[str, float]:
    """Flatten every numeric metric in a report into one name -> value map."""
    out: dict[str, float] = {}
    for task, block in report.blocks.items():
        prefix = task.value
        for name in ("miou", "accuracy", "mf1"):
            value = getattr(block, name)
            if value is not None:
                out[f"{prefix}.{name}"] = value
        for attr in ("recall_at", "per_sample_recall_at", "f1_at"):
            mapping = getattr(block, attr)
            if mapping:
                for t, v in mapping.items():
                    out[f"{prefix}.{attr}@{t}"] = v
    return out
