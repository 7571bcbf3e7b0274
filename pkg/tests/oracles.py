"""Independent reference implementations used as test oracles.

These are written from the definitions with no shared code paths: no regex,
no LabelSet, no numpy vectorization.
"""

from fractions import Fraction

CODES = ["AE100", "AE200", "AD000", "PC100", "PC200", "PC300", "PE100", "PE200", "PP100", "PT100"]


def looks_like_code(tok):
    return (len(tok) == 5 and tok[0] in "ABCDEFGHIJKLMNOPQRSTUVWXYZ" and tok[1] in "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
            and all(ch in "0123456789" for ch in tok[2:]))


def oracle_rewards(pred_tokens, truth, tags=True, judge_score=0.0, reasoning="why"):
    """Reward components for a completion whose tail is ``pred_tokens``.

    Returns a dict of exact Fractions (the partial fraction is rational) so
    comparisons against floats use an explicit tolerance for that one term.
    """
    valid = []
    invalid = []
    for t in pred_tokens:
        if t in CODES:
            if t not in valid:
                valid.append(t)
        elif looks_like_code(t):
            if t not in invalid:
                invalid.append(t)
    truth = list(dict.fromkeys(truth))
    inter = 0
    for t in valid:
        for u in truth:
            if t == u:
                inter += 1
    same = len(valid) == len(truth) and inter == len(truth)
    correctness = Fraction(2) if same else Fraction(0)
    if 0 < inter < len(truth):
        partial = Fraction(1, 10) + Fraction(9, 10) * Fraction(inter, len(truth))
    else:
        partial = Fraction(0)
    fmt = Fraction(1, 4) if tags and len(valid) > 0 else Fraction(0)
    validity = Fraction(-1, 4) * len(invalid)
    judge = Fraction(judge_score).limit_denominator(8) if (tags and reasoning) else Fraction(0)
    total = correctness + partial + fmt + validity + judge
    return {"correctness": correctness, "partial": partial, "format": fmt, "validity": validity,
            "judge": judge, "total": total}


def oracle_report(pairs):
    """Every EvalReport field from plain double loops over samples and codes."""
    n = len(pairs)
    exact = 0
    partial = 0
    for pred, truth in pairs:
        p = sorted(set(pred))
        t = sorted(set(truth))
        if p == t:
            exact += 1
        shared = 0
        for a in p:
            for b in t:
                if a == b:
                    shared += 1
        if shared > 0:
            partial += 1

    def div(a, b):
        return a / b if b else 0.0

    per = {}
    for c in CODES:
        tp = fp = fn = 0
        for pred, truth in pairs:
            inp, intr = c in pred, c in truth
            if inp and intr:
                tp += 1
            elif inp:
                fp += 1
            elif intr:
                fn += 1
        prec = div(tp, tp + fp)
        rec = div(tp, tp + fn)
        f1 = div(2 * prec * rec, prec + rec)
        per[c] = {"tp": tp, "fp": fp, "fn": fn, "precision": prec, "recall": rec, "f1": f1}
    TP = sum(v["tp"] for v in per.values())
    FP = sum(v["fp"] for v in per.values())
    FN = sum(v["fn"] for v in per.values())
    mp = sum(v["precision"] for v in per.values()) / len(CODES)
    mr = sum(v["recall"] for v in per.values()) / len(CODES)
    mf = sum(v["f1"] for v in per.values()) / len(CODES)
    up = div(TP, TP + FP)
    ur = div(TP, TP + FN)
    uf = div(2 * up * ur, up + ur)
    return {"n_samples": n, "exact_match": exact / n, "partial_match": partial / n, "per_code": per,
            "macro_precision": mp, "macro_recall": mr, "macro_f1": mf,
            "micro_precision": up, "micro_recall": ur, "micro_f1": uf}
