"""Command-line entry point: ``hfacs-grpo {balance,train,eval,report}``.

Exit codes: 0 success, 1 contract violation (bad config, schema, labels,
mixed runs), 2 environment or I/O failure (missing files, empty inputs,
unreachable gateways).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .data import (
    AccidentRecord,
    InsufficientData,
    NoExemplars,
    SchemaError,
    balance_training_set,
    load_dataset,
    save_jsonl,
    split_train_test,
)
from .gateway import GatewayError, HttpGenerator, HttpJudge, StubGenerator, judge_stub
from .grpo.policy import ToyPolicy, decode, featurize
from .grpo.trainer import checkpoint_path, initial_policy, latest_checkpoint, train
from .metrics import EmptyInput, EvalReport, evaluate, render_table
from .parsing import parse_completion
from .rewards import RewardEngine
from .taxonomy import CODE_NAMES, InvalidLabel
from .telemetry import (
    MixedDigest,
    TelemetryError,
    TelemetryWriter,
    read_telemetry,
    reward_curve,
    summarize,
    truncate_telemetry,
    write_curve,
)

log = logging.getLogger("hfacs_grpo")

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2


class MissingPrediction(UserWarning):
    def __init__(self, ev_ids):
        self.ev_ids = list(ev_ids)
        super().__init__(f"{len(self.ev_ids)} test records have no prediction: {', '.join(self.ev_ids)}")


def _judge(cfg: RunConfig):
    return judge_stub({"min_length": cfg.stub_judge_min_length}) if cfg.stub_gateways else HttpJudge(cfg.judge)


def _generator(cfg: RunConfig):
    return StubGenerator() if cfg.stub_gateways else HttpGenerator(cfg.generator)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# --- balance -----------------------------------------------------------------

def cmd_balance(cfg: RunConfig) -> int:
    digest = cfg.digest()
    records = load_dataset(cfg.paths.dataset)
    train_part, test = split_train_test(records, cfg.split)
    result = balance_training_set(train_part, cfg.split, _generator(cfg))
    for p in (cfg.paths.balanced, cfg.paths.test_set):
        Path(p).parent.mkdir(parents=True, exist_ok=True)
    save_jsonl(result.records, cfg.paths.balanced, {"config_digest": digest})
    save_jsonl(test, cfg.paths.test_set, {"config_digest": digest})
    if cfg.save_synthetic_data:
        cfg.paths.out.mkdir(parents=True, exist_ok=True)
        with open(cfg.paths.synthetic_audit, "w", encoding="utf-8") as fh:
            for row in result.audit:
                fh.write(json.dumps({**row, "config_digest": digest}) + "\n")
    counts = result.counts()
    print(f"train {len(result.records)} records ({len(result.synthetic)} synthetic), test {len(test)}")
    for code in CODE_NAMES:
        print(f"  {code}  {counts[code]}")
    print(f"generator calls: {result.generator_calls}")
    return EXIT_OK


# --- train -----------------------------------------------------------------

def cmd_train(cfg: RunConfig, resume: bool = False) -> int:
    digest = cfg.digest()
    dataset = load_dataset(cfg.paths.balanced)
    if not dataset:
        raise EmptyInput(f"{cfg.paths.balanced}: no training records")
    paths = cfg.paths
    paths.out.mkdir(parents=True, exist_ok=True)
    resume_from = latest_checkpoint(paths.checkpoints) if resume and paths.checkpoints.exists() else None
    if resume and resume_from is None:
        log.warning("no checkpoint under %s; starting from scratch", paths.checkpoints)
    if resume_from is not None:
        with np.load(resume_from) as z:
            done = int(z["step"])
        truncate_telemetry(paths.telemetry, done)
        truncate_telemetry(paths.timings, done)
        print(f"resuming from {resume_from} (step {done})")
    else:
        for p in (paths.telemetry, paths.timings):
            p.unlink(missing_ok=True)
    _write_json(paths.out / "config.json", {"config_digest": digest, **cfg.to_dict()})
    engine = RewardEngine(_judge(cfg), cfg.train.partial_variant)
    with TelemetryWriter(paths.telemetry, digest, timings_path=paths.timings) as sink:
        trainer = train(dataset, cfg.train, engine, sinks=[sink], policy=initial_policy(cfg.train),
                        checkpoint_dir=paths.checkpoints, config_digest=digest, resume_from=resume_from)
    final = checkpoint_path(paths.checkpoints, trainer.step)
    if not final.exists():
        trainer.save_checkpoint(final, digest)
    records, skipped = read_telemetry(paths.telemetry)
    write_curve(paths.curve, reward_curve(records))
    print(f"trained {trainer.step} steps; telemetry {len(records)} records; checkpoint {final}")
    return EXIT_OK


# --- eval ------------------------------------------------------------------

def _read_predictions(path: str | Path) -> dict[str, str]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "ev_id" not in row or "completion_text" not in row:
                raise SchemaError("ev_id" if "ev_id" not in row else "completion_text")
            preds[str(row["ev_id"])] = row["completion_text"]
    if not preds:
        raise EmptyInput(f"{path}: no predictions")
    return preds


def evaluate_predictions(test: list[AccidentRecord], preds: dict[str, str]) -> EvalReport:
    missing = [r.ev_id for r in test if r.ev_id not in preds]
    if missing:
        log.warning("%s", MissingPrediction(missing))
    pairs = [(parse_completion(preds[r.ev_id]).predicted, r.labels) for r in test if r.ev_id in preds]
    return evaluate(pairs)


def sample_predictions(policy: ToyPolicy, test: list[AccidentRecord], cfg: RunConfig, k: int) -> dict[str, str]:
    """One sampled completion per record under the evaluation sampling settings."""
    sp = cfg.train.eval_sampling
    out = {}
    for i, r in enumerate(test):
        rng = np.random.default_rng([cfg.train.rng_seed, 11, i, k])
        out[r.ev_id] = decode(policy.sample(featurize(r.narrative), sp, rng).tokens)
    return out


def cmd_eval(cfg: RunConfig, checkpoint: str | None = None, predictions: list[str] | None = None) -> int:
    digest = cfg.digest()
    test = load_dataset(cfg.paths.test_set)
    if not test:
        raise EmptyInput(f"{cfg.paths.test_set}: empty test set")
    rows: list[tuple[str, EvalReport]] = []
    payload: dict = {"config_digest": digest, "test_set": str(cfg.paths.test_set), "runs": {}}
    out = cfg.paths.out
    for path in predictions or []:
        rep = evaluate_predictions(test, _read_predictions(path))
        name = Path(path).stem
        rows.append((name, rep))
        payload["runs"][name] = {"source": str(path), **rep.to_dict()}
    if checkpoint is not None or not predictions:
        ckpt = Path(checkpoint) if checkpoint else latest_checkpoint(cfg.paths.checkpoints)
        if ckpt is None or not ckpt.exists():
            raise FileNotFoundError(str(ckpt or cfg.paths.checkpoints))
        policy = ToyPolicy.load(ckpt)
        reports = []
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "eval_completions.jsonl", "w", encoding="utf-8") as fh:
            for k in range(cfg.samples):
                preds = sample_predictions(policy, test, cfg, k)
                for ev_id, text in preds.items():
                    fh.write(json.dumps({"ev_id": ev_id, "sample": k, "completion_text": text,
                                         "config_digest": digest}) + "\n")
                reports.append(evaluate_predictions(test, preds))
        rows.append((ckpt.stem, reports[0]))
        entry = {"source": str(ckpt), **reports[0].to_dict()}
        if cfg.samples > 1:
            exact = np.array([r.exact_match for r in reports])
            entry["samples"] = [r.to_dict() for r in reports]
            entry["exact_match_mean"] = float(exact.mean())
            entry["exact_match_std"] = float(exact.std())
        payload["runs"][ckpt.stem] = entry
    table = render_table(rows)
    _write_json(out / "eval_report.json", payload)
    (out / "eval_table.txt").write_text(f"{table}\nconfig digest: {digest}\n", encoding="utf-8")
    print(table)
    return EXIT_OK


# --- report ----------------------------------------------------------------

def cmd_report(path: str | Path, head: int = 50, window: int = 100) -> int:
    records, skipped = read_telemetry(path)
    if not records:
        raise EmptyInput(f"{path}: no readable telemetry records")
    summary = summarize(records, skipped, head=head, window=window)
    print(summary.render(head))
    return EXIT_OK


# --- argument handling -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override train and split seeds")
    common.add_argument("--stub-gateways", action="store_true", help="use deterministic offline judge/generator")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="hfacs-grpo", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("balance", parents=[common], help="split and balance a labelled dataset")
    b.add_argument("--save-synthetic-data", action="store_true", help="write the synthetic audit file")

    t = sub.add_parser("train", parents=[common], help="run GRPO training")
    t.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")

    e = sub.add_parser("eval", parents=[common], help="score a checkpoint or prediction files")
    e.add_argument("--test-set", help="override paths.test_set")
    e.add_argument("--checkpoint", help="policy checkpoint (.npz)")
    e.add_argument("--predictions", action="append", help="JSONL of {ev_id, completion_text}; repeatable")
    e.add_argument("--samples", type=int, help="completions per test record")

    r = sub.add_parser("report", parents=[common], help="summarize a telemetry log")
    r.add_argument("telemetry", nargs="?", help="telemetry JSONL (default: the run's log)")
    r.add_argument("--head", type=int, default=50, help="steps compared at each end")
    r.add_argument("--window", type=int, default=100, help="steps per trend window")
    return ap


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.stub_gateways:
        cfg.stub_gateways = True
    if getattr(args, "save_synthetic_data", False):
        cfg.save_synthetic_data = True
    if getattr(args, "test_set", None):
        cfg.paths.test_set = args.test_set
    if getattr(args, "samples", None) is not None:
        if args.samples < 1:
            raise ConfigError("--samples must be at least 1")
        cfg.samples = args.samples
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "balance":
            return cmd_balance(cfg)
        if args.command == "train":
            return cmd_train(cfg, resume=args.resume)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.predictions)
        return cmd_report(args.telemetry or cfg.paths.telemetry, args.head, args.window)
    except (ConfigError, SchemaError, InvalidLabel, InsufficientData, NoExemplars, MixedDigest) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONTRACT
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename or e}", file=sys.stderr)
        return EXIT_IO
    except (EmptyInput, TelemetryError, GatewayError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
