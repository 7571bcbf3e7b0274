"""Five-component reward for HFACS completions and their sum."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

from .gateway import JudgeClient, JudgeUnavailable
from .parsing import ParsedCompletion, parse_completion
from .taxonomy import LabelSet

log = logging.getLogger(__name__)

CORRECT_REWARD = 2.0
PARTIAL_BASE = 0.1
PARTIAL_SCALE = 0.9
FORMAT_REWARD = 0.25
INVALID_PENALTY = -0.25

PARTIAL_STRICT = "strict"    # 0 < |pred & truth| < |truth|
PARTIAL_OVERLAP = "overlap"  # any overlap short of an exact match


@dataclass(frozen=True)
class RewardBreakdown:
    correctness: float
    partial: float
    format: float
    validity: float
    judge: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_components(cls, correctness, partial, format, validity, judge) -> "RewardBreakdown":
        total = correctness + partial + format + validity + judge
        return cls(correctness, partial, format, validity, judge, total)


COMPONENTS = ("correctness", "partial", "format", "validity", "judge")


def correctness_reward(pred: LabelSet, truth: LabelSet) -> float:
    return CORRECT_REWARD if set(pred) == set(truth) else 0.0


def partial_match_reward(pred: LabelSet, truth: LabelSet, variant: str = PARTIAL_STRICT) -> float:
    """Scaled credit for partially overlapping predictions.

    The default ``strict`` variant pays only when the overlap is a proper,
    non-empty part of the truth, so supersets of the truth earn nothing.
    ``overlap`` pays for any overlap except an exact match; supersets then
    reach 1.0.
    """
    hits = len(set(pred) & set(truth))
    if variant == PARTIAL_STRICT:
        eligible = 0 < hits < len(truth)
    elif variant == PARTIAL_OVERLAP:
        eligible = hits > 0 and set(pred) != set(truth)
    else:
        raise ValueError(f"unknown partial variant {variant!r}")
    if not eligible:
        return 0.0
    return PARTIAL_BASE + PARTIAL_SCALE * hits / len(truth)


def format_reward(parsed: ParsedCompletion) -> float:
    ok = parsed.wellformed_tags and len(parsed.predicted) > 0
    return FORMAT_REWARD if ok else 0.0


def validity_reward(parsed: ParsedCompletion) -> float:
    n = len(parsed.invalid_tokens)
    return INVALID_PENALTY * n if n else 0.0


def judge_reward(reasoning_text: str | None, narrative: str, judge: JudgeClient) -> float:
    if not reasoning_text:
        return 0.0
    try:
        return judge.evaluate(reasoning_text, narrative).score
    except JudgeUnavailable as exc:
        log.warning("judge unavailable, scoring 0.0: %s", exc)
        return 0.0


def total_reward(
    raw_completion: str,
    truth: LabelSet,
    narrative: str,
    judge: JudgeClient,
    partial_variant: str = PARTIAL_STRICT,
) -> RewardBreakdown:
    parsed = parse_completion(raw_completion)
    return score_parsed(parsed, truth, narrative, judge, partial_variant)


def score_parsed(parsed, truth, narrative, judge, partial_variant=PARTIAL_STRICT) -> RewardBreakdown:
    return RewardBreakdown.from_components(
        correctness_reward(parsed.predicted, truth),
        partial_match_reward(parsed.predicted, truth, partial_variant),
        format_reward(parsed),
        validity_reward(parsed),
        judge_reward(parsed.reasoning_text, narrative, judge),
    )


class RewardEngine:
    """Scores groups of completions against one ground truth."""

    def __init__(self, judge: JudgeClient, partial_variant: str = PARTIAL_STRICT, max_workers: int = 1):
        self.judge = judge
        self.partial_variant = partial_variant
        self.max_workers = max_workers

    def score(self, raw_completion: str, truth: LabelSet, narrative: str) -> RewardBreakdown:
        return total_reward(raw_completion, truth, narrative, self.judge, self.partial_variant)

    def score_group(self, completions: Sequence[str], truth: LabelSet, narrative: str) -> list[RewardBreakdown]:
        if self.max_workers <= 1:
            return [self.score(c, truth, narrative) for c in completions]
        with ThreadPoolExecutor(self.max_workers) as pool:
            return list(pool.map(lambda c: self.score(c, truth, narrative), completions))
