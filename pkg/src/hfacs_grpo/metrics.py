"""Multi-label evaluation: exact/partial match and macro/micro P/R/F1."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .taxonomy import CODE_NAMES

Pair = tuple[frozenset, frozenset]


class EmptyInput(ValueError):
    pass


def _check(pairs: Sequence[Pair]) -> None:
    if not pairs:
        raise EmptyInput("no (prediction, truth) pairs to evaluate")


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def _f1(p: float, r: float) -> float:
    return _div(2 * p * r, p + r)


def exact_match_accuracy(pairs: Sequence[Pair]) -> float:
    _check(pairs)
    return sum(set(p) == set(t) for p, t in pairs) / len(pairs)


def partial_match_accuracy(pairs: Sequence[Pair]) -> float:
    _check(pairs)
    return sum(bool(set(p) & set(t)) for p, t in pairs) / len(pairs)


@dataclass(frozen=True)
class CodeScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return _div(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float:
        return _div(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float:
        return _f1(self.precision, self.recall)

    @property
    def support(self) -> int:
        return self.tp + self.fn


def per_code_counts(pairs: Sequence[Pair]) -> dict[str, CodeScore]:
    _check(pairs)
    tp = dict.fromkeys(CODE_NAMES, 0)
    fp = dict.fromkeys(CODE_NAMES, 0)
    fn = dict.fromkeys(CODE_NAMES, 0)
    for pred, truth in pairs:
        pred, truth = set(pred), set(truth)
        for c in pred & truth:
            tp[c] += 1
        for c in pred - truth:
            fp[c] += 1
        for c in truth - pred:
            fn[c] += 1
    return {c: CodeScore(tp[c], fp[c], fn[c]) for c in CODE_NAMES}


def macro_scores(counts: dict[str, CodeScore], over: str = "all") -> tuple[float, float, float]:
    """Unweighted means over codes. ``over="present"`` skips codes with no
    support and no predictions instead of counting them as zeros."""
    if over == "all":
        codes = list(CODE_NAMES)
    elif over == "present":
        codes = [c for c in CODE_NAMES if counts[c].tp + counts[c].fp + counts[c].fn]
    else:
        raise ValueError(f"unknown macro averaging {over!r}")
    if not codes:
        return 0.0, 0.0, 0.0
    n = len(codes)
    return (
        sum(counts[c].precision for c in codes) / n,
        sum(counts[c].recall for c in codes) / n,
        sum(counts[c].f1 for c in codes) / n,
    )


def micro_scores(counts: dict[str, CodeScore]) -> tuple[float, float, float]:
    tp = sum(s.tp for s in counts.values())
    fp = sum(s.fp for s in counts.values())
    fn = sum(s.fn for s in counts.values())
    p, r = _div(tp, tp + fp), _div(tp, tp + fn)
    return p, r, _f1(p, r)


@dataclass(frozen=True)
class EvalReport:
    n_samples: int
    exact_match: float
    partial_match: float
    per_code: dict[str, dict[str, float]]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2)


def evaluate(pairs: Iterable[Pair], macro_over: str = "all") -> EvalReport:
    pairs = list(pairs)
    counts = per_code_counts(pairs)
    mp, mr, mf = macro_scores(counts, macro_over)
    up, ur, uf = micro_scores(counts)
    per_code = {
        c: {"tp": s.tp, "fp": s.fp, "fn": s.fn, "precision": s.precision, "recall": s.recall, "f1": s.f1}
        for c, s in counts.items()
    }
    return EvalReport(
        n_samples=len(pairs),
        exact_match=exact_match_accuracy(pairs),
        partial_match=partial_match_accuracy(pairs),
        per_code=per_code,
        macro_precision=mp, macro_recall=mr, macro_f1=mf,
        micro_precision=up, micro_recall=ur, micro_f1=uf,
    )


TABLE_COLUMNS = (
    ("Exact", "exact_match"),
    ("Partial", "partial_match"),
    ("Macro F1", "macro_f1"),
    ("Macro Prec.", "macro_precision"),
    ("Micro F1", "micro_f1"),
    ("Micro Prec.", "micro_precision"),
)


def render_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Monospace comparison table, one row per model, four decimals."""
    name_w = max([len("Model")] + [len(n) for n, _ in rows])
    widths = [max(len(h), 6) for h, _ in TABLE_COLUMNS]
    head = "Model".ljust(name_w) + "  " + "  ".join(h.rjust(w) for (h, _), w in zip(TABLE_COLUMNS, widths))
    rule = "-" * len(head)
    lines = [rule, head, rule]
    for name, rep in rows:
        cells = [f"{getattr(rep, attr):.4f}".rjust(w) for (_, attr), w in zip(TABLE_COLUMNS, widths)]
        lines.append(name.ljust(name_w) + "  " + "  ".join(cells))
    lines.append(rule)
    return "\n".join(lines)
