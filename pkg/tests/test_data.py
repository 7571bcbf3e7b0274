import json
import logging

import pytest
from hypothesis import given, settings, strategies as st

from hfacs_grpo.data import (
    USER_PREFIX, AccidentRecord, InsufficientData, NoExemplars, SchemaError, SplitSpec,
    balance_training_set, build_chat_prompt, build_fewshot_prompt, code_counts, load_dataset,
    save_jsonl, split_train_test,
)
from hfacs_grpo.gateway import GenerationFailed, StubGenerator
from hfacs_grpo.taxonomy import CODE_NAMES, InvalidLabel, LabelSet, get_code

from datasets import BALANCE_COUNTS, counted_records, synthetic_records


def write_csv(path, rows, header="ev_id,narr_accf,hfacs_codes"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_load_csv(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["1,pilot was fatigued,PC200", "2,gusting wind,PE100 AE100",
                                      "3,overcorrected flare,AE100 AE100"])
    recs = load_dataset(p)
    assert [r.labels for r in recs] == [LabelSet({"PC200"}), LabelSet({"PE100", "AE100"}), LabelSet({"AE100"})]


def test_load_jsonl_roundtrip(tmp_path):
    recs = counted_records({"AE100": 3, "PE200": 2})
    save_jsonl(recs, tmp_path / "d.jsonl", extra={"config_digest": "abc"})
    assert load_dataset(tmp_path / "d.jsonl") == recs


def test_missing_column(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["1,AE100"], header="ev_id,hfacs_codes")
    with pytest.raises(SchemaError) as e:
        load_dataset(p)
    assert e.value.column == "narr_accf"


def test_bad_label_names_its_row(tmp_path):
    p = write_csv(tmp_path / "d.csv", ["1,a,AE100", "2,b,AE100 BADCODE"])
    with pytest.raises(InvalidLabel) as e:
        load_dataset(p)
    assert e.value.row == 1


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.csv")


def test_empty_narrative_skipped(tmp_path, caplog):
    p = write_csv(tmp_path / "d.csv", ["1,,AE100", "2,text,AE100"])
    with caplog.at_level(logging.WARNING):
        assert [r.ev_id for r in load_dataset(p)] == ["2"]
    assert "empty narrative" in caplog.text


def test_ground_truth_cannot_be_empty():
    with pytest.raises(InvalidLabel):
        AccidentRecord("x", "text", LabelSet())


def thousand():
    counts = dict.fromkeys(CODE_NAMES, 100)
    return counted_records(counts, seed=3)


def test_split_sizes_and_disjointness():
    recs = thousand()
    train, test = split_train_test(recs, SplitSpec())
    assert (len(test), len(train)) == (110, 890)
    assert not {r.ev_id for r in train} & {r.ev_id for r in test}
    extra = test[100:]
    assert all(r.labels & SplitSpec().underrepresented for r in extra)


def test_split_deterministic_and_seeded():
    recs = thousand()
    a = split_train_test(recs, SplitSpec())
    assert a == split_train_test(recs, SplitSpec())
    assert a != split_train_test(recs, SplitSpec(rng_seed=1))


def test_split_excludes_synthetic():
    recs = thousand() + synthetic_records("PE200", 300)
    train, test = split_train_test(recs, SplitSpec())
    assert len(test) == 110 and not any(r.is_synthetic for r in test)
    assert sum(r.is_synthetic for r in train) == 300


def test_split_insufficient():
    with pytest.raises(InsufficientData):
        split_train_test(counted_records({"AE100": 99}), SplitSpec())
    with pytest.raises(InsufficientData):
        split_train_test(counted_records({"AE100": 105, "PE200": 5}), SplitSpec())


def test_balance_fixture():
    gen = StubGenerator()
    res = balance_training_set(counted_records(BALANCE_COUNTS), SplitSpec(), gen)
    assert set(res.counts().values()) == {100}
    ids = [r.ev_id for r in res.synthetic if "PE200" in r.labels]
    assert ids == [f"SYNTH-PE200-{k}" for k in range(1, 41)]
    assert gen.calls == res.generator_calls == 40 + 25 + 10
    assert len(res.audit) == res.generator_calls


def test_balance_at_target_is_identity():
    recs = counted_records(dict.fromkeys(CODE_NAMES, 100))
    gen = StubGenerator()
    res = balance_training_set(recs, SplitSpec(), gen)
    assert sorted(r.ev_id for r in res.records) == sorted(r.ev_id for r in recs)
    assert gen.calls == 0


def test_balance_is_idempotent_and_deterministic():
    recs = counted_records(BALANCE_COUNTS)
    once = balance_training_set(recs, SplitSpec(), StubGenerator())
    assert once.records == balance_training_set(recs, SplitSpec(), StubGenerator()).records
    twice = balance_training_set(once.records, SplitSpec(), StubGenerator())
    assert twice.generator_calls == 0
    assert sorted(r.ev_id for r in twice.records) == sorted(r.ev_id for r in once.records)


def test_balance_continues_existing_synthetic_ids():
    recs = counted_records({**BALANCE_COUNTS, "PE200": 50}) + synthetic_records("PE200", 10)
    res = balance_training_set(recs, SplitSpec(), StubGenerator())
    new = [r.ev_id for r in res.synthetic if "PE200" in r.labels]
    assert new == [f"SYNTH-PE200-{k}" for k in range(11, 51)]


def test_balance_multilabel_never_overshoots():
    recs = counted_records({**dict.fromkeys(CODE_NAMES, 100), "AE100": 150, "PE100": 80})
    recs += [AccidentRecord(f"M{i}", "overcorrected gusting", LabelSet({"AE100", "PE100"})) for i in range(60)]
    res = balance_training_set(recs, SplitSpec(), StubGenerator())
    assert set(res.counts().values()) == {100}


def test_balance_no_exemplars():
    with pytest.raises(NoExemplars):
        balance_training_set(counted_records({"AE100": 100}), SplitSpec(), StubGenerator())


def test_balance_generator_failure_reports_progress():
    class Flaky:
        calls = 0

        def complete(self, prompt):
            self.calls += 1
            if self.calls > 3:
                raise GenerationFailed("down")
            return "text"

    with pytest.raises(GenerationFailed, match="3/40"):
        balance_training_set(counted_records({**dict.fromkeys(CODE_NAMES, 100), "PE200": 60}), SplitSpec(), Flaky())


@settings(max_examples=25)
@given(st.dictionaries(st.sampled_from(CODE_NAMES), st.integers(1, 160), min_size=10, max_size=10))
def test_balance_hits_target_for_any_counts(counts):
    res = balance_training_set(counted_records(counts), SplitSpec(), StubGenerator())
    assert set(code_counts(res.records).values()) == {100}


def test_fewshot_prompt():
    ex = counted_records({"PE200": 12})
    p = build_fewshot_prompt("PE200", ex[:10])
    assert all(r.narrative in p for r in ex[:10])
    assert get_code("PE200").definition in p
    assert p.count("Example ") == 10
    assert build_fewshot_prompt("PE200", ex[:3]).count("Example ") == 3
    assert p == build_fewshot_prompt("PE200", ex[:10])
    with pytest.raises(NoExemplars):
        build_fewshot_prompt("PE200", [])


def test_chat_prompt():
    b = build_chat_prompt("The pilot was fatigued.")
    assert b.user.startswith(USER_PREFIX.strip()) and b.user.endswith("fatigued.")
    assert all(c in b.system for c in CODE_NAMES)
    assert "<reasoning>" in b.system and "</reasoning>" in b.system
    with pytest.raises(ValueError):
        build_chat_prompt("   ")
