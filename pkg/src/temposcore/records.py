"""Line-delimited dataset records and deterministic report rendering.

Datasets are JSON Lines, one sample per line (schema in docs/formats.md):

    {"id": "tg-000", "task": "TG", "duration": 100.0,
     "gt_intervals": [[12.3, 34.5]], "prediction": "<answer>12.3 to 34.5</answer>"}

``gt_answer`` is required for GVQA lines and forbidden elsewhere. Reports
and per-sample reward records are emitted as ``key=value`` lines with all
numbers fixed to 4 decimals, so golden files stay byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .evaluation import (
    EvalReport,
    RECALL_THRESHOLDS,
    Sample,
    TAL_PROTOCOL,
    TAL_THRESHOLDS,
    TaskBlock,
)
from .intervals import Interval
from .parsing import TaskKind
from .rewards import MatchResult, RewardBreakdown

REPORT_VERSION = 1


class DatasetError(ValueError):
    """A malformed dataset line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_REQUIRED_FIELDS = {"id", "task", "gt_intervals", "prediction"}
_ALL_FIELDS = _REQUIRED_FIELDS | {"duration", "gt_answer"}


def sample_from_record(record: dict, line_no: int) -> Sample:
    if not isinstance(record, dict):
        raise DatasetError(line_no, "record must be a JSON object")
    missing = _REQUIRED_FIELDS - record.keys()
    if missing:
        raise DatasetError(line_no, f"missing fields: {', '.join(sorted(missing))}")
    unknown = record.keys() - _ALL_FIELDS
    if unknown:
        raise DatasetError(line_no, f"unexpected fields: {', '.join(sorted(unknown))}")
    if not isinstance(record["id"], str) or not record["id"]:
        raise DatasetError(line_no, "id must be a non-empty string")
    try:
        task = TaskKind(record["task"])
    except ValueError:
        raise DatasetError(line_no, f"unknown task tag {record['task']!r}") from None
    if not isinstance(record["prediction"], str):
        raise DatasetError(line_no, "prediction must be a string")
    raw_gts = record["gt_intervals"]
    if not isinstance(raw_gts, list) or not raw_gts:
        raise DatasetError(line_no, "gt_intervals must be a non-empty list")
    intervals = []
    for pair in raw_gts:
        if not (isinstance(pair, list) and len(pair) == 2):
            raise DatasetError(line_no, f"gt interval must be a [start, end] pair, got {pair!r}")
        try:
            intervals.append(Interval(float(pair[0]), float(pair[1])))
        except (TypeError, ValueError) as exc:
            raise DatasetError(line_no, f"bad gt interval {pair!r}: {exc}") from exc
    duration = record.get("duration")
    if duration is not None and not isinstance(duration, (int, float)):
        raise DatasetError(line_no, "duration must be a number")
    gt_answer = record.get("gt_answer")
    if gt_answer is not None and not isinstance(gt_answer, str):
        raise DatasetError(line_no, "gt_answer must be a string")
    try:
        return Sample(
            id=record["id"],
            task=task,
            gt_intervals=tuple(intervals),
            prediction_raw=record["prediction"],
            duration=float(duration) if duration is not None else None,
            gt_answer=gt_answer,
        )
    except ValueError as exc:
        raise DatasetError(line_no, str(exc)) from exc


def load_dataset(path: str | Path) -> list[Sample]:
    """Read a JSONL dataset; raises DatasetError naming the offending line."""
    samples: list[Sample] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(line_no, f"invalid JSON: {exc}") from exc
            samples.append(sample_from_record(record, line_no))
    return samples


def sample_to_record(sample: Sample) -> dict:
    record: dict = {
        "id": sample.id,
        "task": sample.task.value,
        "gt_intervals": [[iv.start, iv.end] for iv in sample.gt_intervals],
        "prediction": sample.prediction_raw,
    }
    if sample.duration is not None:
        record["duration"] = sample.duration
    if sample.gt_answer is not None:
        record["gt_answer"] = sample.gt_answer
    return record


def write_dataset(samples: Iterable[Sample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(json.dumps(sample_to_record(s)) + "\n")


# ---------------------------------------------------------------------------
# Rendering


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _block_line(block: TaskBlock) -> str:
    parts = [f"task={block.task.value}"]
    if block.task is TaskKind.TAL:
        parts.append(f"protocol={TAL_PROTOCOL}")
    parts.append(f"n_samples={block.n_samples}")
    parts.append(f"n_parse_failures={block.n_parse_failures}")
    if block.n_samples == 0:
        return " ".join(parts)
    if block.accuracy is not None:
        parts.append(f"accuracy={_fmt(block.accuracy)}")
    if block.miou is not None:
        parts.append(f"miou={_fmt(block.miou)}")
    if block.recall_at is not None:
        parts.extend(f"r@{t}={_fmt(block.recall_at[t])}" for t in RECALL_THRESHOLDS)
    if block.per_sample_recall_at is not None:
        parts.extend(f"sr@{t}={_fmt(block.per_sample_recall_at[t])}" for t in RECALL_THRESHOLDS)
    if block.f1_at is not None:
        parts.extend(f"f1@{t}={_fmt(block.f1_at[t])}" for t in TAL_THRESHOLDS)
    if block.mf1 is not None:
        parts.append(f"mf1={_fmt(block.mf1)}")
    return " ".join(parts)


def render_report(report: EvalReport) -> str:
    lines = [f"report_version={REPORT_VERSION}"]
    lines.extend(_block_line(report.blocks[task]) for task in TaskKind)
    return "\n".join(lines) + "\n"


def render_reward_record(
    sample: Sample,
    breakdown: RewardBreakdown,
    match: MatchResult | None = None,
    num_reward: float | None = None,
) -> str:
    parts = [
        f"id={sample.id}",
        f"task={sample.task.value}",
        f"format={int(breakdown.format)}",
        f"loc={_fmt(breakdown.localization)}",
        f"cls={'-' if breakdown.classification is None else int(breakdown.classification)}",
        f"total={_fmt(breakdown.total)}",
    ]
    if num_reward is not None:
        parts.append(f"num={_fmt(num_reward)}")
    if match is not None:
        parts.append(f"siou={_fmt(match.siou)}")
        parts.append(f"f1={_fmt(match.f1)}")
        pairs = ",".join(f"{i}:{j}" for i, j in match.pairs) if match.pairs else "-"
        parts.append(f"pairs={pairs}")
    return " ".join(parts)
