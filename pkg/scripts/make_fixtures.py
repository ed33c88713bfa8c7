#!/usr/bin/env python3
"""Regenerate the test fixture corpora and their frozen golden reports.

Run from the repository root:

    python3 scripts/make_fixtures.py

The perfect corpus serializes each sample's ground truth as its prediction,
so every metric sits at its maximum. The varied corpus deterministically
degrades a share of predictions (jitter, wrong counts, wrong answers,
inverted pairs, garbage) to pin non-trivial report bytes.
"""

from __future__ import annotations

import random
from pathlib import Path

from temposcore import Interval, ParsedOutput, Sample, TaskKind, serialize, write_dataset
from temposcore.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"

OPTIONS = ("A", "B", "C", "D")


def _segments(rng: random.Random, duration: float, n: int) -> tuple[Interval, ...]:
    """n sorted, disjoint segments with >= 1 s gaps, 0.1 s resolution."""
    out = []
    cursor = 0.0
    for k in range(n):
        remaining = n - k
        max_start = duration - remaining * 3.0
        start = round(rng.uniform(cursor + 1.0, max(cursor + 1.0, max_start)), 1)
        length = round(rng.uniform(1.0, min(15.0, duration - start - (remaining - 1) * 3.0)), 1)
        end = round(start + max(length, 1.0), 1)
        out.append(Interval(start, end))
        cursor = end + 1.0
    return tuple(out)


def _gt_counts(task: TaskKind, rng: random.Random) -> int:
    if task is TaskKind.TG:
        return 1
    if task is TaskKind.GVQA:
        return rng.randint(1, 2)
    if task is TaskKind.VHD:
        return rng.randint(1, 3)
    return rng.randint(2, 4)


def perfect_corpus(rng: random.Random, per_task: int = 20) -> list[Sample]:
    samples = []
    for task in TaskKind:
        for i in range(per_task):
            duration = float(rng.randrange(60, 181, 10))
            gts = _segments(rng, duration, _gt_counts(task, rng))
            answer = rng.choice(OPTIONS) if task is TaskKind.GVQA else None
            prediction = serialize(ParsedOutput(intervals=gts, answer_text=answer), task)
            samples.append(
                Sample(
                    id=f"{task.value.lower()}-{i:03d}",
                    task=task,
                    gt_intervals=gts,
                    prediction_raw=prediction,
                    duration=duration,
                    gt_answer=answer,
                )
            )
    return samples


def _jitter(iv: Interval, rng: random.Random, duration: float) -> Interval:
    shift = round(rng.uniform(-4.0, 4.0), 1)
    start = min(max(iv.start + shift, 0.0), duration)
    end = min(max(iv.end + shift, start), duration)
    return Interval(round(start, 1), round(end, 1))


def _degrade(sample: Sample, rng: random.Random) -> str:
    kind = rng.randrange(6)
    gts = sample.gt_intervals
    duration = sample.duration or 100.0
    answer = sample.gt_answer
    if kind == 0:  # jittered but well-formed
        intervals = tuple(_jitter(iv, rng, duration) for iv in gts)
        return serialize(ParsedOutput(intervals=intervals, answer_text=answer), sample.task)
    if kind == 1:  # wrong count: drop or duplicate one interval
        intervals = gts[:-1] if len(gts) > 1 else gts + (gts[0],)
        if sample.task is TaskKind.TG:
            intervals = gts + (gts[0],)
        body = ", ".join(f"{iv.start} to {iv.end}" for iv in intervals)
        if sample.task is TaskKind.GVQA:
            return f"<answer>{answer}</answer><glue>{body}</glue>"
        return f"<answer>{body}</answer>"
    if kind == 2:  # wrong answer / chain-of-thought noise around a good block
        if sample.task is TaskKind.GVQA:
            wrong = OPTIONS[(OPTIONS.index(answer) + 1) % len(OPTIONS)]
            return serialize(ParsedOutput(intervals=gts, answer_text=wrong), sample.task)
        good = serialize(ParsedOutput(intervals=gts), sample.task)
        return f"let me think about the video first. {good} that is my answer."
    if kind == 3:  # inverted pair: format failure, nothing extractable
        iv = gts[0]
        return f"<answer>{iv.end} to {iv.start}</answer>"
    if kind == 4:  # plain garbage
        return "the highlight happens around the middle of the video"
    return serialize(ParsedOutput(intervals=gts, answer_text=answer), sample.task)


def varied_corpus(rng: random.Random, per_task: int = 8) -> list[Sample]:
    out = []
    for s in perfect_corpus(rng, per_task=per_task):
        out.append(
            Sample(
                id=f"v-{s.id}",
                task=s.task,
                gt_intervals=s.gt_intervals,
                prediction_raw=_degrade(s, rng),
                duration=s.duration,
                gt_answer=s.gt_answer,
            )
        )
    return out


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20240817)
    mixed = perfect_corpus(rng)
    write_dataset(mixed, FIXTURES / "mixed_corpus.jsonl")
    code = cli_main(
        ["eval", "--dataset", str(FIXTURES / "mixed_corpus.jsonl"),
         "--out", str(FIXTURES / "golden_report.txt")]
    )
    assert code == 0

    rng = random.Random(917)
    varied = varied_corpus(rng)
    write_dataset(varied, FIXTURES / "varied_corpus.jsonl")
    code = cli_main(
        ["eval", "--dataset", str(FIXTURES / "varied_corpus.jsonl"),
         "--out", str(FIXTURES / "varied_report.txt")]
    )
    assert code == 0
    print("fixtures written to", FIXTURES)


if __name__ == "__main__":
    main()
