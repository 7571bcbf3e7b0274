import math

import pytest
from hypothesis import given, strategies as st

from hfacs_grpo.gateway import Grade, JudgeUnavailable, JudgeVerdict
from hfacs_grpo.parsing import parse_completion
from hfacs_grpo.rewards import (
    PARTIAL_OVERLAP, RewardEngine, correctness_reward, format_reward, judge_reward,
    partial_match_reward, total_reward, validity_reward,
)
from hfacs_grpo.taxonomy import CODE_NAMES, LabelSet


class FixedJudge:
    def __init__(self, grade):
        self.grade = grade
        self.calls = 0

    def evaluate(self, reasoning_text, narrative):
        self.calls += 1
        return JudgeVerdict(self.grade)


class DownJudge:
    def evaluate(self, reasoning_text, narrative):
        raise JudgeUnavailable("gateway down")


L = LabelSet


def test_correctness():
    assert correctness_reward(L({"AE100", "PE100"}), L({"AE100", "PE100"})) == 2.0
    assert correctness_reward(L(), L({"AE100"})) == 0.0
    assert correctness_reward(L({"AE100", "PE100", "PC100"}), L({"AE100", "PE100"})) == 0.0


def test_partial():
    assert math.isclose(partial_match_reward(L({"AE100"}), L({"AE100", "PE100", "PC100"})), 0.4, abs_tol=1e-12)
    assert partial_match_reward(L({"PT100"}), L({"AE100"})) == 0.0
    assert partial_match_reward(L({"AE100", "PE100"}), L({"AE100", "PE100"})) == 0.0
    # strict supersets earn nothing under the default rule
    assert partial_match_reward(L({"AE100", "PE100"}), L({"AE100"})) == 0.0


def test_partial_overlap_variant_pays_supersets():
    assert partial_match_reward(L({"AE100", "PE100"}), L({"AE100"}), PARTIAL_OVERLAP) == pytest.approx(1.0)
    assert partial_match_reward(L({"AE100"}), L({"AE100"}), PARTIAL_OVERLAP) == 0.0


def test_format():
    assert format_reward(parse_completion("<reasoning>r</reasoning> AE100")) == 0.25
    assert format_reward(parse_completion("AE100")) == 0.0
    assert format_reward(parse_completion("<reasoning>r</reasoning> QQ111")) == 0.0


def test_validity():
    assert validity_reward(parse_completion("<reasoning>r</reasoning> AE100")) == 0.0
    assert validity_reward(parse_completion("<reasoning>r</reasoning> ZZ123 QQ999")) == -0.5
    assert validity_reward(parse_completion("<reasoning>r</reasoning> ZZ123 ZZ123 ZZ123")) == -0.25


def test_judge():
    assert judge_reward(None, "n", FixedJudge(Grade.GOOD)) == 0.0
    assert judge_reward("", "n", FixedJudge(Grade.GOOD)) == 0.0
    assert judge_reward("because", "n", FixedJudge(Grade.GOOD)) == 0.5
    assert judge_reward("because", "n", FixedJudge(Grade.OKAY)) == 0.25
    assert judge_reward("because", "n", FixedJudge(Grade.BAD)) == 0.0


def test_judge_outage_degrades_to_zero(caplog):
    assert judge_reward("because", "n", DownJudge()) == 0.0
    assert "unavailable" in caplog.text


def test_total_examples():
    best = total_reward("<reasoning>fine</reasoning> AE100 PE100", L({"AE100", "PE100"}), "n", FixedJudge(Grade.GOOD))
    assert best.total == 2.75
    empty = total_reward("", L({"AE100"}), "n", FixedJudge(Grade.GOOD))
    assert empty.as_dict() == dict.fromkeys(empty.as_dict(), 0.0)
    mixed = total_reward("<reasoning>ok</reasoning> AE100 ZZ123", L({"AE100", "PE100"}), "n", FixedJudge(Grade.OKAY))
    assert mixed.correctness == 0.0 and mixed.partial == pytest.approx(0.55)
    assert mixed.total == pytest.approx(0.80, abs=1e-12)


def test_engine_parallel_matches_serial():
    texts = ["<reasoning>a</reasoning> AE100", "PE100", "<reasoning>b</reasoning> ZZ000 PT100", ""]
    truth = L({"AE100"})
    serial = RewardEngine(FixedJudge(Grade.OKAY)).score_group(texts, truth, "n")
    threaded = RewardEngine(FixedJudge(Grade.OKAY), max_workers=4).score_group(texts, truth, "n")
    assert serial == threaded


codes = st.sets(st.sampled_from(CODE_NAMES), max_size=4)
truths = st.sets(st.sampled_from(CODE_NAMES), min_size=1, max_size=4)
junk = st.lists(st.sampled_from(["ZZ123", "QQ999", "XY000", "word"]), max_size=4)


@given(codes, truths, junk, st.sampled_from(list(Grade)), st.booleans())
def test_range_and_exclusion(pred, truth, extra, grade, tags):
    tail = " ".join(sorted(pred) + extra)
    raw = f"<reasoning>r</reasoning> {tail}" if tags else tail
    b = total_reward(raw, L(truth), "n", FixedJudge(grade))
    k = len(parse_completion(raw).invalid_tokens)
    assert -0.25 * k <= b.total <= 2.75
    assert not (b.correctness > 0 and b.partial > 0)
    assert b.total == b.correctness + b.partial + b.format + b.validity + b.judge


@given(st.sets(st.sampled_from(CODE_NAMES), min_size=3, max_size=6), st.data())
def test_partial_monotone_in_hits(truth, data):
    truth = sorted(truth)
    k = data.draw(st.integers(1, len(truth) - 2))
    pred = set(truth[:k])
    more = pred | {truth[k]}
    assert partial_match_reward(L(more), L(truth)) >= partial_match_reward(L(pred), L(truth))
