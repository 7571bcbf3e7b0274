"""End-to-end toy experiment: train on the keyword task, score a held-out set."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import AccidentRecord
from .gateway import judge_stub
from .grpo.policy import decode, featurize
from .grpo.trainer import TrainConfig, Trainer, train
from .metrics import EvalReport, evaluate
from .parsing import parse_completion
from .rewards import RewardEngine
from .telemetry import TelemetryRecord, records_from_report
from .toy_task import TOY_JUDGE_RULES, make_records


@dataclass
class ToyResult:
    config: TrainConfig
    trainer: Trainer
    report: EvalReport
    step_totals: list[float]
    telemetry: list[TelemetryRecord] = field(repr=False)
    seconds: float

    @property
    def reward_gain(self) -> float:
        """Mean total reward of the last 50 steps minus that of the first 50."""
        return float(np.mean(self.step_totals[-50:]) - np.mean(self.step_totals[:50]))


def held_out_predictions(trainer: Trainer, test: list[AccidentRecord], seed: int):
    sp = trainer.config.eval_sampling
    pairs = []
    for i, r in enumerate(test):
        rng = np.random.default_rng([seed, 11, i, 0])
        text = decode(trainer.policy.sample(featurize(r.narrative), sp, rng).tokens)
        pairs.append((parse_completion(text).predicted, r.labels))
    return pairs


def run_toy(seed: int = 0, steps: int = 500, per_code: int = 100, test_per_code: int = 10,
            data_seed: int = 1, **overrides) -> ToyResult:
    cfg = TrainConfig.toy(max_steps=steps, rng_seed=seed, **overrides)
    train_set = make_records(per_code, seed=data_seed)
    test_set = make_records(test_per_code, seed=data_seed + 1000, prefix="TEST")
    totals: list[float] = []
    telemetry: list[TelemetryRecord] = []
    digest = cfg.digest()

    def sink(rep):
        totals.append(float(np.mean([b.total for b in rep.rewards])))
        telemetry.extend(records_from_report(rep, digest))

    t0 = time.perf_counter()
    trainer = train(train_set, cfg, RewardEngine(judge_stub(TOY_JUDGE_RULES), cfg.partial_variant), sinks=[sink])
    report = evaluate(held_out_predictions(trainer, test_set, seed))
    return ToyResult(cfg, trainer, report, totals, telemetry, time.perf_counter() - t0)
