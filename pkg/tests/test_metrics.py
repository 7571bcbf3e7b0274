import json

import pytest
from hypothesis import given, strategies as st

from hfacs_grpo.metrics import (
    CodeScore, EmptyInput, evaluate, exact_match_accuracy, macro_scores, micro_scores,
    partial_match_accuracy, per_code_counts, render_table,
)
from hfacs_grpo.taxonomy import CODE_NAMES, LabelSet

from oracles import oracle_report
from suites import random_pairs, report_matches

L = LabelSet
pair_st = st.tuples(st.frozensets(st.sampled_from(CODE_NAMES), max_size=4),
                    st.frozensets(st.sampled_from(CODE_NAMES), min_size=1, max_size=3))
suite_st = st.lists(pair_st, min_size=1, max_size=40)


def test_exact_and_partial_examples():
    same = [(L({"AE100"}), L({"AE100"}))] * 5
    assert exact_match_accuracy(same) == partial_match_accuracy(same) == 1.0
    assert exact_match_accuracy([(L(), L({"AE100"}))] * 3) == 0.0
    hundred = [(L({"AE100"}), L({"AE100"}))] * 18 + [(L({"PE100"}), L({"AE100", "PE100"}))] * 70 + \
              [(L({"PC100"}), L({"AE100"}))] * 12
    assert exact_match_accuracy(hundred) == 0.18
    assert partial_match_accuracy(hundred) == 0.88
    assert partial_match_accuracy([(L({"AE100"}), L({"PE100"}))]) == 0.0


def test_empty_input():
    for fn in (exact_match_accuracy, partial_match_accuracy, per_code_counts, evaluate):
        with pytest.raises(EmptyInput):
            fn([])


def test_per_code_examples():
    c = per_code_counts([(L({"AE100"}), L({"AE100"}))])
    assert c["AE100"] == CodeScore(1, 0, 0)
    c = per_code_counts([(L({"AE100"}), L({"PE100"}))])
    assert c["AE100"] == CodeScore(0, 1, 0) and c["PE100"] == CodeScore(0, 0, 1)


def test_macro_examples():
    perfect = {c: CodeScore(3, 0, 0) for c in CODE_NAMES}
    assert macro_scores(perfect) == (1.0, 1.0, 1.0)
    one = {c: CodeScore(0, 0, 0) for c in CODE_NAMES} | {"AE100": CodeScore(2, 0, 0)}
    assert macro_scores(one) == pytest.approx((0.1, 0.1, 0.1), abs=1e-15)
    assert macro_scores(one, over="present") == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        macro_scores(one, over="weighted")


def test_micro_examples():
    assert micro_scores({c: CodeScore(1, 0, 0) for c in CODE_NAMES}) == (1.0, 1.0, 1.0)
    pooled = {c: CodeScore(0, 0, 0) for c in CODE_NAMES} | {"AE100": CodeScore(5, 2, 1), "PE100": CodeScore(0, 3, 4)}
    assert micro_scores(pooled) == pytest.approx((0.5, 0.5, 0.5))


def test_degenerate_predictor():
    r = evaluate([(L(), L({"AE100"})), (L(), L({"PE100", "PC100"}))])
    assert r.exact_match == r.partial_match == r.micro_precision == r.micro_recall == r.micro_f1 == 0.0


def test_single_exact_pair():
    r = evaluate([(L({"PT100"}), L({"PT100"}))])
    assert r.exact_match == r.partial_match == 1.0
    assert r.macro_f1 == pytest.approx(0.1)


def test_matches_oracle_on_random_suite():
    pairs = random_pairs(200, seed=7)
    assert report_matches(evaluate(pairs), oracle_report(pairs))


@given(suite_st)
def test_exact_never_exceeds_partial(pairs):
    r = evaluate(pairs)
    assert r.exact_match <= r.partial_match


@given(suite_st, st.randoms())
def test_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert evaluate(pairs).to_dict() == evaluate(shuffled).to_dict()


@given(suite_st)
def test_micro_recall_identity(pairs):
    counts = per_code_counts(pairs)
    tp = sum(s.tp for s in counts.values())
    assert evaluate(pairs).micro_recall == pytest.approx(tp / sum(len(t) for _, t in pairs), abs=1e-15)


@given(st.integers(0, 10_000))
def test_single_label_identity(seed):
    r = evaluate(random_pairs(30, seed, single=True))
    assert r.exact_match == pytest.approx(r.micro_recall, abs=1e-15)
    assert r.exact_match == pytest.approx(r.micro_precision, abs=1e-15)


def test_render_table_layout():
    r = evaluate([(L({"AE100"}), L({"AE100"}))])
    text = render_table([("baseline", r), ("grpo", r)])
    lines = text.splitlines()
    assert lines[1].split()[:3] == ["Model", "Exact", "Partial"]
    assert lines[3].split()[1:3] == ["1.0000", "1.0000"]
    assert len({len(l) for l in lines}) == 1


def test_report_json_roundtrip():
    r = evaluate(random_pairs(20, seed=1))
    d = json.loads(r.to_json(model="x"))
    assert d["model"] == "x" and d["n_samples"] == 20
