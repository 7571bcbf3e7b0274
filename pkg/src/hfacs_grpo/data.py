"""Accident records: loading, the constrained test split, per-code balancing
and few-shot synthetic generation for deficit codes."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gateway import GenerationFailed, GeneratorClient
from .parsing import CLOSE_TAG, OPEN_TAG
from .taxonomy import CODE_NAMES, UNDERREPRESENTED, InvalidLabel, LabelSet, all_codes, get_code, parse_label_string

log = logging.getLogger(__name__)

SYNTH_PREFIX = "SYNTH-"
SYNTH_ID = re.compile(r"SYNTH-([A-Z]{2}[0-9]{3})-([1-9][0-9]*)")
REQUIRED_FIELDS = ("ev_id", "narr_accf", "hfacs_codes")
USER_PREFIX = "Analyze this accident narrative: "


class SchemaError(ValueError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"missing required column {column!r}")


class InsufficientData(ValueError):
    pass


class NoExemplars(ValueError):
    pass


@dataclass(frozen=True)
class AccidentRecord:
    ev_id: str
    narrative: str
    labels: LabelSet

    def __post_init__(self):
        if not self.labels:
            raise InvalidLabel("", None)

    @property
    def is_synthetic(self) -> bool:
        return self.ev_id.startswith(SYNTH_PREFIX)

    def to_json(self) -> dict:
        return {"ev_id": self.ev_id, "narr_accf": self.narrative, "hfacs_codes": str(self.labels)}


@dataclass
class SplitSpec:
    test_base_count: int = 100
    underrepresented: frozenset[str] = UNDERREPRESENTED
    underrepresented_extra_fraction: float = 0.10
    per_code_train_target: int = 100
    max_exemplars: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        self.underrepresented = frozenset(self.underrepresented)
        if self.test_base_count <= 0 or self.per_code_train_target <= 0:
            raise ValueError("counts must be positive")
        if not 0.0 <= self.underrepresented_extra_fraction <= 1.0:
            raise ValueError("underrepresented_extra_fraction must be in [0, 1]")

    @property
    def extra_count(self) -> int:
        return math.ceil(self.underrepresented_extra_fraction * self.test_base_count)


# --- I/O -------------------------------------------------------------------

def _rows(path: Path) -> Iterable[dict]:
    if path.suffix in (".jsonl", ".json", ".ndjson"):
        with path.open(encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    yield json.loads(line)
        return
    delimiter = "\t" if path.suffix == ".tsv" else ","
    with path.open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f, delimiter=delimiter)
        for col in REQUIRED_FIELDS:
            if reader.fieldnames is None or col not in reader.fieldnames:
                raise SchemaError(col)
        yield from reader


def load_dataset(path: str | Path) -> list[AccidentRecord]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    records = []
    for i, row in enumerate(_rows(path)):
        for col in REQUIRED_FIELDS:
            if col not in row:
                raise SchemaError(col)
        narrative = (row["narr_accf"] or "").strip()
        if not narrative:
            log.warning("row %d (%s): empty narrative, skipped", i, row["ev_id"])
            continue
        labels = parse_label_string(row["hfacs_codes"] or "", row=i)
        if not labels:
            raise InvalidLabel("", i)
        records.append(AccidentRecord(str(row["ev_id"]), narrative, labels))
    return records


def save_jsonl(records: Iterable[AccidentRecord], path: str | Path, extra: dict | None = None) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({**r.to_json(), **(extra or {})}) + "\n")


# --- split -----------------------------------------------------------------

def split_train_test(records: Sequence[AccidentRecord], spec: SplitSpec):
    """Uniform sample of real records, topped up with real records touching
    an underrepresented code. Synthetic records always stay in train."""
    rng = np.random.default_rng([spec.rng_seed, 1])
    real = [i for i, r in enumerate(records) if not r.is_synthetic]
    if len(real) < spec.test_base_count:
        raise InsufficientData(f"need {spec.test_base_count} real records, have {len(real)}")
    base = rng.choice(real, size=spec.test_base_count, replace=False)
    chosen = set(base.tolist())
    pool = [i for i in real if i not in chosen and records[i].labels & spec.underrepresented]
    if len(pool) < spec.extra_count:
        raise InsufficientData(
            f"need {spec.extra_count} extra real records with {sorted(spec.underrepresented)}, have {len(pool)}")
    extra = rng.choice(pool, size=spec.extra_count, replace=False) if spec.extra_count else []
    test_idx = list(base) + list(extra)
    test_set = set(int(i) for i in test_idx)
    test = [records[int(i)] for i in test_idx]
    train = [r for i, r in enumerate(records) if i not in test_set]
    return train, test


# --- prompts ---------------------------------------------------------------

def build_fewshot_prompt(code: str, exemplars: Sequence[AccidentRecord]) -> str:
    if not exemplars:
        raise NoExemplars(code)
    info = get_code(code)
    parts = [
        "You write realistic general aviation accident narratives in the style of NTSB reports.",
        f"Target code: {info.code}",
        f"Factor: {info.display_name}",
        f"Definition: {info.definition}",
        "",
        f"Here are {len(exemplars)} real narratives that exhibit this factor:",
    ]
    for k, ex in enumerate(exemplars, 1):
        parts.append(f"Example {k}: {ex.narrative}")
    parts += [
        "",
        f"Write one new narrative that clearly exhibits {info.display_name} ({info.code}). "
        "Do not copy the examples. Return the narrative text only.",
    ]
    return "\n".join(parts)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str


def system_prompt() -> str:
    lines = ["You are an aviation safety analyst. Classify the accident narrative into "
             "the HFACS codes below. More than one code may apply.", ""]
    for c in all_codes():
        lines.append(f"{c.code} ({c.layer.value}, {c.display_name}): {c.definition}")
    lines += [
        "",
        f"Output format: first explain your analysis inside {OPEN_TAG}...{CLOSE_TAG} tags, "
        "then list the applicable codes after the closing tag as a single "
        "space-separated line, e.g.",
        f"{OPEN_TAG}Your analysis here{CLOSE_TAG} AE100 PE100",
        "Use only the codes listed above.",
    ]
    return "\n".join(lines)


def build_chat_prompt(narrative: str) -> PromptBundle:
    if not narrative.strip():
        raise ValueError("empty narrative")
    return PromptBundle(system_prompt(), USER_PREFIX + narrative)


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# --- balancing -------------------------------------------------------------

@dataclass
class BalanceResult:
    records: list[AccidentRecord]
    synthetic: list[AccidentRecord] = field(default_factory=list)
    audit: list[dict] = field(default_factory=list)
    generator_calls: int = 0

    def counts(self) -> dict[str, int]:
        return code_counts(self.records)


def code_counts(records: Iterable[AccidentRecord]) -> dict[str, int]:
    counts = dict.fromkeys(CODE_NAMES, 0)
    for r in records:
        for c in r.labels:
            counts[c] += 1
    return counts


def balance_training_set(train: Sequence[AccidentRecord], spec: SplitSpec,
                         generator: GeneratorClient) -> BalanceResult:
    """Select records so that exactly ``per_code_train_target`` contain each code.

    Codes are filled in canonical order. A record is taken only if every code
    it carries is still under target, so one record may serve several quotas
    and no quota overshoots. Deficits are closed with single-code synthetic
    narratives ``SYNTH-{code}-{k}``.
    """
    target = spec.per_code_train_target
    counts = dict.fromkeys(CODE_NAMES, 0)
    selected: set[int] = set()
    synthetic: list[AccidentRecord] = []
    audit: list[dict] = []
    calls = 0
    for pos, code in enumerate(CODE_NAMES):
        rng = np.random.default_rng([spec.rng_seed, 2, pos])
        candidates = [i for i, r in enumerate(train) if code in r.labels and i not in selected]
        for i in rng.permutation(len(candidates)):
            if counts[code] >= target:
                break
            rec = train[candidates[i]]
            if all(counts[c] < target for c in rec.labels):
                selected.add(candidates[i])
                for c in rec.labels:
                    counts[c] += 1
        deficit = target - counts[code]
        if deficit <= 0:
            continue
        exemplars = [r for r in train if code in r.labels and not r.is_synthetic][: spec.max_exemplars]
        prompt = build_fewshot_prompt(code, exemplars)
        # continue numbering past synthetic ids already present in the input
        offset = max((int(m.group(2)) for r in train
                      if (m := SYNTH_ID.fullmatch(r.ev_id)) and m.group(1) == code), default=0)
        for k in range(offset + 1, offset + deficit + 1):
            # k in the prompt keeps outputs distinct while staying reproducible.
            p = f"{prompt}\nVariant: {k}"
            try:
                text = generator.complete(p)
            except GenerationFailed as exc:
                raise GenerationFailed(
                    f"{code}: generated {k - 1 - offset}/{deficit} synthetic records before failure: {exc}") from exc
            calls += 1
            rec = AccidentRecord(f"{SYNTH_PREFIX}{code}-{k}", text, LabelSet({code}))
            synthetic.append(rec)
            audit.append({"ev_id": rec.ev_id, "code": code, "prompt_digest": digest_text(p), "narrative": text})
        counts[code] += deficit
    kept = [r for i, r in enumerate(train) if i in selected]
    return BalanceResult(kept + synthetic, synthetic, audit, calls)
