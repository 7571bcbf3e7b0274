"""Run configuration: one YAML file holding every knob of a pipeline run.

Credentials never live here; gateway sections name the environment variable
that holds the key.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .data import SplitSpec
from .gateway import GatewayConfig
from .grpo.trainer import TrainConfig
from .toy_task import TOY_JUDGE_RULES


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    dataset: str = "data/records.jsonl"
    balanced: str = "runs/balanced.jsonl"
    test_set: str = "runs/test.jsonl"
    output_dir: str = "runs/default"

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def telemetry(self) -> Path:
        return self.out / "telemetry.jsonl"

    @property
    def timings(self) -> Path:
        return self.out / "timings.jsonl"

    @property
    def curve(self) -> Path:
        return self.out / "reward_curve.csv"

    @property
    def checkpoints(self) -> Path:
        return self.out / "checkpoints"

    @property
    def synthetic_audit(self) -> Path:
        return self.out / "synthetic_audit.jsonl"


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig.toy)
    split: SplitSpec = field(default_factory=SplitSpec)
    judge: GatewayConfig = field(default_factory=GatewayConfig)
    generator: GatewayConfig = field(default_factory=GatewayConfig)
    paths: Paths = field(default_factory=Paths)
    stub_gateways: bool = False
    save_synthetic_data: bool = False
    samples: int = 1
    stub_judge_min_length: int = TOY_JUDGE_RULES["min_length"]

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(
            self,
            train=dataclasses.replace(self.train, rng_seed=seed),
            split=dataclasses.replace(self.split, rng_seed=seed),
        )

    def to_dict(self) -> dict:
        split = dataclasses.asdict(self.split)
        split["underrepresented"] = sorted(self.split.underrepresented)
        return {
            "train": self.train.to_dict(),
            "split": split,
            "judge": dataclasses.asdict(self.judge),
            "generator": dataclasses.asdict(self.generator),
            "paths": dataclasses.asdict(self.paths),
            "stub_gateways": self.stub_gateways,
            "save_synthetic_data": self.save_synthetic_data,
            "samples": self.samples,
            "stub_judge_min_length": self.stub_judge_min_length,
        }

    def digest(self) -> str:
        """Identifies the substance of a run; output locations do not count."""
        d = self.to_dict()
        del d["paths"], d["save_synthetic_data"], d["samples"]
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


_SECTIONS = {"train": TrainConfig, "split": SplitSpec, "judge": GatewayConfig,
             "generator": GatewayConfig, "paths": Paths}
_FLAGS = ("stub_gateways", "save_synthetic_data", "samples", "stub_judge_min_length")


def _section(cls, raw, name: str, base):
    if raw is None:
        return base
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(unknown)}")
    try:
        return dataclasses.replace(base, **raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"section '{name}': {e}") from e


def config_from_dict(raw: dict | None) -> RunConfig:
    raw = dict(raw or {})
    unknown = sorted(set(raw) - set(_SECTIONS) - set(_FLAGS))
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    base = RunConfig()
    kwargs = {name: _section(cls, raw.get(name), name, getattr(base, name)) for name, cls in _SECTIONS.items()}
    for flag in _FLAGS:
        kwargs[flag] = raw.get(flag, getattr(base, flag))
    if int(kwargs["samples"]) < 1:
        raise ConfigError("samples must be at least 1")
    return RunConfig(**kwargs)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML ({e})") from e
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)
