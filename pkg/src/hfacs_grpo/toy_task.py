"""Keyword-separable synthetic HFACS task for desk-scale training runs.

Each code owns one trigger keyword. A narrative repeats the keywords of its
codes among a few neutral filler words, so a small policy can learn the mapping.
"""

from __future__ import annotations

import numpy as np

from .taxonomy import CODE_NAMES, LabelSet

CODE_KEYWORDS: dict[str, str] = {
    "AE100": "overcorrected",
    "AE200": "continued",
    "AD000": "unauthorized",
    "PC100": "complacent",
    "PC200": "fatigued",
    "PC300": "inexperienced",
    "PE100": "gusting",
    "PE200": "malfunction",
    "PP100": "unplanned",
    "PT100": "untrained",
}

# Toy completions reason in a single word, so the judge length floor drops to 1.
TOY_JUDGE_RULES = {"min_length": 1}

NEUTRAL_WORDS = (
    "the", "pilot", "aircraft", "during", "approach", "landing", "runway", "flight",
    "airplane", "departed", "reported", "engine", "after", "descent", "student",
    "instructor", "airport", "field", "was", "and", "gear", "at", "final", "turn",
)


def make_narrative(labels, rng: np.random.Generator, n_filler: int = 2, repeats: int = 4) -> str:
    words = list(rng.choice(NEUTRAL_WORDS, size=n_filler))
    for code in LabelSet(labels).ordered():
        for _ in range(repeats):
            words.insert(int(rng.integers(0, len(words) + 1)), CODE_KEYWORDS[code])
    return " ".join(words)


def make_records(per_code: int, seed: int, prefix: str = "TOY", max_labels: int = 1):
    """Records with ``per_code`` single-code (or small multi-code) labels per code.

    With ``max_labels == 1`` each code appears in exactly ``per_code`` records.
    """
    from .data import AccidentRecord

    rng = np.random.default_rng(seed)
    records = []
    k = 0
    for code in CODE_NAMES:
        for _ in range(per_code):
            labels = {code}
            if max_labels > 1:
                extra = int(rng.integers(0, max_labels))
                others = [c for c in CODE_NAMES if c != code]
                labels.update(rng.choice(others, size=extra, replace=False).tolist())
            k += 1
            records.append(AccidentRecord(f"{prefix}-{k:05d}", make_narrative(labels, rng), LabelSet(labels)))
    order = rng.permutation(len(records))
    return [records[i] for i in order]
