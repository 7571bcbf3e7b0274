"""Write the keyword-separable toy task as train/test JSONL files.

    python3 scripts/make_toy_data.py --out runs/toy
"""

import argparse
from pathlib import Path

from hfacs_grpo.data import save_jsonl
from hfacs_grpo.toy_task import make_records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--per-code", type=int, default=100)
    ap.add_argument("--test-per-code", type=int, default=10)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = make_records(args.per_code, seed=args.seed)
    test = make_records(args.test_per_code, seed=args.seed + 1000, prefix="TEST")
    save_jsonl(train, out / "train.jsonl")
    save_jsonl(test, out / "test.jsonl")
    print(f"wrote {len(train)} train and {len(test)} test records to {out}")


if __name__ == "__main__":
    main()
