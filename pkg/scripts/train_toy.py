"""Train the toy policy on the keyword task and report held-out accuracy.

    python3 scripts/train_toy.py                 # one seeded 500-step run
    python3 scripts/train_toy.py --seeds 0-11    # seed sweep
"""

import argparse

import numpy as np

from hfacs_grpo.experiments import run_toy
from hfacs_grpo.metrics import render_table


def parse_seeds(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--lr", type=float, help="override the toy learning rate")
    ap.add_argument("--kl-beta", type=float)
    args = ap.parse_args()

    overrides = {}
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.kl_beta is not None:
        overrides["kl_beta"] = args.kl_beta
    rows, exact = [], []
    for seed in parse_seeds(args.seeds):
        res = run_toy(seed=seed, steps=args.steps, **overrides)
        exact.append(res.report.exact_match)
        rows.append((f"seed {seed}", res.report))
        print(f"seed {seed:>3}  exact {res.report.exact_match:.2f}  reward gain {res.reward_gain:+.3f}  "
              f"({res.seconds:.1f}s)")
    print(render_table(rows))
    if len(exact) > 1:
        exact = np.array(exact)
        print(f"exact: mean {exact.mean():.3f}  min {exact.min():.2f}  >=0.80 in {(exact >= 0.8).sum()}/{len(exact)}")


if __name__ == "__main__":
    main()
