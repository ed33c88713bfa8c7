"""Localization, classification, and composite rewards.

Three correspondence types between predicted intervals and ground-truth
instances drive the localization term:

  Type 1 (one-to-one, TG/DTG)    mean IoU over positionally paired intervals
  Type 2 (many-to-one, VHD/GVQA) IoU between the merged prediction union and
                                 the merged ground-truth union
  Type 3 (many-to-many, TAL)     exp(-|n_pred - n_gt| / (min(n_gt, 3) * sigma))
                                 plus the F1 of a DP monotone matching that
                                 maximizes summed IoU

The total per-sample reward is format + localization, plus the binary
answer reward for GVQA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .intervals import Interval, iou, merge, set_iou
from .parsing import TaskKind, extract_answer_text, extract_intervals, format_reward

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class TalConfig:
    """Knobs for the many-to-many (TAL) reward; sigma sharpens the count penalty."""

    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching predictions to ground-truth instances.

    ``pairs`` are (pred_index, gt_index) into the chronologically sorted
    lists, strictly increasing in both coordinates; zero-IoU pairs are
    omitted from the listing (they contribute nothing to any score).
    ``siou`` is the summed IoU over matched pairs; precision and recall
    divide it by the prediction and ground-truth counts.
    """

    pairs: tuple[tuple[int, int], ...]
    pair_ious: tuple[float, ...]
    siou: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-sample reward components; total = format + localization (+ classification)."""

    format: float
    localization: float
    classification: float | None
    total: float


def _sorted_chrono(xs: Sequence[Interval]) -> list[Interval]:
    return sorted(xs, key=lambda iv: (iv.start, iv.end))


def _prf(siou: float, n_pred: int, n_gt: int) -> tuple[float, float, float]:
    precision = siou / n_pred if n_pred else 0.0
    recall = siou / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _empty_match() -> MatchResult:
    return MatchResult(pairs=(), pair_ious=(), siou=0.0, precision=0.0, recall=0.0, f1=0.0)


def reward_type1(preds: Sequence[Interval], gts: Sequence[Interval]) -> float:
    """One-to-one reward: mean IoU over positional pairs.

    With matched counts this is the plain mean over N pairs. When the model
    emits the wrong number of intervals, pairs are formed positionally up to
    the shorter list and the sum is divided by the longer count, so missing
    or extra segments dilute the reward.
    """
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if not preds:
        return 0.0
    n = min(len(preds), len(gts))
    total = sum(iou(preds[i], gts[i]) for i in range(n))
    return total / max(len(preds), len(gts))


def reward_type2(preds: Sequence[Interval], gts: Sequence[Interval]) -> float:
    """Many-to-one reward: IoU between the merged unions of both lists."""
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if not preds:
        return 0.0
    return set_iou(merge(preds), merge(gts))


def instance_number_reward(n_pred: int, n_gt: int, sigma: float) -> float:
    """Exponential penalty on the instance-count mismatch, in (0, 1].

    exp(-|n_pred - n_gt| / (min(n_gt, 3) * sigma)); the min(n_gt, 3) keeps
    the penalty scale comparable across sparse and dense videos.
    """
    if n_gt < 1:
        raise ValueError("ground-truth instance count must be >= 1")
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    return math.exp(-abs(n_pred - n_gt) / (min(n_gt, 3) * sigma))


def _iou_matrix(preds: list[Interval], gts: list[Interval]) -> list[list[float]]:
    return [[iou(p, g) for g in gts] for p in preds]


def dp_match(preds: Sequence[Interval], gts: Sequence[Interval]) -> MatchResult:
    """Monotone matching maximizing summed IoU, via dynamic programming.

    Both lists are sorted chronologically (by start, ties by end); the DP
    table follows D[i,j] = max(D[i-1,j], D[i,j-1], D[i-1,j-1] + IoU[i,j])
    and the backtrack prefers the diagonal on ties, then skipping a ground
    truth, then skipping a prediction, which makes the reported pairing
    deterministic and maximizes the number of matched pairs among
    sIoU-equal solutions.
    """
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if not preds:
        return _empty_match()

    sp = _sorted_chrono(preds)
    sg = _sorted_chrono(gts)
    m, n = len(sp), len(sg)
    ious = _iou_matrix(sp, sg)

    d = [[0.0] * (n + 1) for _ in range(m + 1)]
    # choice codes: 2 = diagonal (match), 1 = skip gt, 0 = skip pred
    path = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            skip_pred = d[i - 1][j]
            skip_gt = d[i][j - 1]
            diag = d[i - 1][j - 1] + ious[i - 1][j - 1]
            if diag >= skip_pred and diag >= skip_gt:
                d[i][j] = diag
                path[i][j] = 2
            elif skip_gt >= skip_pred:
                d[i][j] = skip_gt
                path[i][j] = 1
            else:
                d[i][j] = skip_pred
                path[i][j] = 0

    pairs: list[tuple[int, int]] = []
    pair_ious: list[float] = []
    i, j = m, n
    while i > 0 and j > 0:
        if path[i][j] == 2:
            if ious[i - 1][j - 1] > 0.0:
                pairs.append((i - 1, j - 1))
                pair_ious.append(ious[i - 1][j - 1])
            i -= 1
            j -= 1
        elif path[i][j] == 1:
            j -= 1
        else:
            i -= 1
    pairs.reverse()
    pair_ious.reverse()

    siou = d[m][n]
    precision, recall, f1 = _prf(siou, m, n)
    return MatchResult(tuple(pairs), tuple(pair_ious), siou, precision, recall, f1)


def sequential_match(preds: Sequence[Interval], gts: Sequence[Interval]) -> MatchResult:
    """Naive positional matching baseline: pair (i, i) up to the shorter list."""
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if not preds:
        return _empty_match()

    sp = _sorted_chrono(preds)
    sg = _sorted_chrono(gts)
    pairs: list[tuple[int, int]] = []
    pair_ious: list[float] = []
    siou = 0.0
    for i in range(min(len(sp), len(sg))):
        v = iou(sp[i], sg[i])
        siou += v
        if v > 0.0:
            pairs.append((i, i))
            pair_ious.append(v)
    precision, recall, f1 = _prf(siou, len(sp), len(sg))
    return MatchResult(tuple(pairs), tuple(pair_ious), siou, precision, recall, f1)


def brute_force_match(preds: Sequence[Interval], gts: Sequence[Interval]) -> MatchResult:
    """Exhaustive monotone-matching oracle for small instances.

    Enumerates every monotone matching (each way of choosing k predictions
    and k ground truths, paired in order) and returns the sIoU-maximal one.
    Deliberately avoids the DP recurrence so it can serve as an independent
    check of :func:`dp_match`. Refuses lists longer than 8.
    """
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if len(preds) > BRUTE_FORCE_LIMIT or len(gts) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} intervals per side")
    if not preds:
        return _empty_match()

    sp = _sorted_chrono(preds)
    sg = _sorted_chrono(gts)
    m, n = len(sp), len(sg)
    ious = _iou_matrix(sp, sg)

    best_siou = 0.0
    best: tuple[tuple[int, int], ...] = ()
    for k in range(1, min(m, n) + 1):
        for pk in combinations(range(m), k):
            for gk in combinations(range(n), k):
                s = sum(ious[i][j] for i, j in zip(pk, gk))
                if s > best_siou:
                    best_siou = s
                    best = tuple(zip(pk, gk))

    pairs = tuple((i, j) for i, j in best if ious[i][j] > 0.0)
    pair_ious = tuple(ious[i][j] for i, j in pairs)
    precision, recall, f1 = _prf(best_siou, m, n)
    return MatchResult(pairs, pair_ious, best_siou, precision, recall, f1)


def reward_tal(preds: Sequence[Interval], gts: Sequence[Interval], cfg: TalConfig) -> float:
    """Many-to-many reward: instance-number reward plus matching F1, in (0, 2]."""
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    return instance_number_reward(len(preds), len(gts), cfg.sigma) + dp_match(preds, gts).f1


_OPTION_SEPARATORS = ".):,;!? \t"


def _normalize_answer(text: str) -> str:
    return text.strip().casefold().rstrip(_OPTION_SEPARATORS)


def classification_reward(pred: str, gt: str) -> int:
    """Binary answer reward with light normalization.

    Both sides are trimmed, case-folded, and stripped of trailing
    punctuation. When the ground truth is a single option letter, a
    prediction that leads with that letter followed by a separator
    ("b)", "B. the dog") also counts.
    """
    if not gt.strip():
        raise ValueError("ground-truth answer must be non-empty")
    p = _normalize_answer(pred)
    g = _normalize_answer(gt)
    if p == g:
        return 1
    if len(g) == 1 and g.isalpha() and p:
        return int(p[0] == g and (len(p) == 1 or p[1] in _OPTION_SEPARATORS))
    return 0


_LOC_TYPE1 = (TaskKind.TG, TaskKind.DTG)
_LOC_TYPE2 = (TaskKind.VHD, TaskKind.GVQA)


def localization_reward(
    preds: Sequence[Interval] | None,
    task: TaskKind,
    gts: Sequence[Interval],
    cfg: TalConfig,
) -> float:
    """Dispatch the localization reward by task; None preds = hard parse failure."""
    if preds is None:
        return 0.0
    if task in _LOC_TYPE1:
        return reward_type1(preds, gts)
    if task in _LOC_TYPE2:
        return reward_type2(preds, gts)
    return reward_tal(preds, gts, cfg)


def total_reward(
    raw: str,
    task: TaskKind,
    gts: Sequence[Interval],
    gt_answer: str | None = None,
    cfg: TalConfig = TalConfig(),
    strict: bool = False,
    tal_normalize: bool = False,
) -> RewardBreakdown:
    """Composite per-sample reward: format + localization (+ classification).

    The localization term is not gated on the format reward: whatever
    intervals can still be extracted from the tagged blocks are scored, so a
    response with the right times but the wrong arity earns partial credit.
    Only a missing block zeroes localization. ``tal_normalize`` rescales the
    TAL term by 0.5 to put it on the same [0, 1] scale as the other tasks.
    """
    if not gts:
        raise ValueError("ground truth must contain at least one interval")
    if (gt_answer is not None) != (task is TaskKind.GVQA):
        raise ValueError("gt_answer must be given exactly for GVQA samples")

    fmt = float(format_reward(raw, task, strict=strict))
    preds = extract_intervals(raw, task)
    loc = localization_reward(preds, task, gts, cfg)
    if task is TaskKind.TAL and tal_normalize:
        loc *= 0.5

    cls: float | None = None
    total = fmt + loc
    if task is TaskKind.GVQA:
        assert gt_answer is not None
        answer = extract_answer_text(raw)
        cls = float(classification_reward(answer, gt_answer)) if answer is not None else 0.0
        total += cls
    return RewardBreakdown(format=fmt, localization=loc, classification=cls, total=total)
