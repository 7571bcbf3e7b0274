"""The training loop: snapshot, sample a group, score, normalize, update."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..data import AccidentRecord, digest_text
from ..parsing import parse_completion
from ..rewards import RewardBreakdown, RewardEngine
from .objective import degenerate_group, group_advantages, grpo_objective, kl_estimate, surrogate_gradient
from .optim import AdamW, clip_global_norm, cosine_lr
from .policy import VOCAB, Completion, SamplingParams, ToyPolicy, decode, featurize, format_prior_policy

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
POLICY_INITS = ("random", "format_prior")


@dataclass
class TrainConfig:
    group_size: int = 6
    max_steps: int = 1000
    learning_rate: float = 5e-6
    warmup_ratio: float = 0.1
    weight_decay: float = 0.1
    grad_clip_norm: float = 0.1
    clip_epsilon: float = 0.2
    kl_beta: float = 0.04
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    checkpoint_every: int = 250
    temperature: float = 1.0
    top_p: float = 0.95
    eval_top_p: float = 0.95
    max_completion_tokens: int = 1024
    advantage_std: str = "population"
    partial_variant: str = "strict"
    hidden_dim: int = 32
    policy_init: str = "random"
    feature_scale: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        self.adam_betas = tuple(self.adam_betas)
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.max_steps < 0 or self.checkpoint_every <= 0 or self.max_completion_tokens <= 0:
            raise ValueError("step counts must be positive")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if self.learning_rate <= 0 or self.temperature <= 0:
            raise ValueError("learning_rate and temperature must be positive")
        if not (0 < self.top_p <= 1 and 0 < self.eval_top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.policy_init not in POLICY_INITS:
            raise ValueError(f"policy_init must be one of {POLICY_INITS}")

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """Defaults sized for ToyPolicy: larger steps, short completions, untruncated
        sampling while training, and a format-aware starting policy."""
        base = {"learning_rate": 1.5e-2, "max_completion_tokens": 16, "top_p": 1.0,
                "policy_init": "format_prior", "feature_scale": 16.0}
        return cls(**{**base, **overrides})

    @property
    def sampling(self) -> SamplingParams:
        return SamplingParams(self.temperature, self.top_p, self.max_completion_tokens)

    @property
    def eval_sampling(self) -> SamplingParams:
        return SamplingParams(self.temperature, self.eval_top_p, self.max_completion_tokens)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class GroupSample:
    prompt_features: np.ndarray
    completions: list[np.ndarray]
    logp_new: list[np.ndarray]
    logp_old: list[np.ndarray]
    logp_ref: list[np.ndarray]
    rewards: np.ndarray
    advantages: np.ndarray


@dataclass
class StepReport:
    step: int
    ev_id: str
    prompt_digest: str
    completions: list[str]
    lengths: list[int]
    parsed_codes: list[list[str]]
    invalid_tokens: list[list[str]]
    rewards: list[RewardBreakdown]
    advantages: list[float]
    objective: float
    grad_norm: float
    learning_rate: float
    mean_kl: float
    degenerate: bool


def initial_policy(config: TrainConfig) -> ToyPolicy:
    if config.policy_init == "format_prior":
        return format_prior_policy(config.rng_seed, config.hidden_dim, feature_scale=config.feature_scale)
    return ToyPolicy(hidden_dim=config.hidden_dim, seed=config.rng_seed, feature_scale=config.feature_scale)


def completion_rngs(seed: int, step: int, group_size: int) -> list[np.random.Generator]:
    return [np.random.default_rng([seed, step, i]) for i in range(group_size)]


class Trainer:
    """Holds policy, frozen reference, optimizer and schedule across steps."""

    def __init__(self, policy: ToyPolicy, config: TrainConfig, engine: RewardEngine,
                 reference: ToyPolicy | None = None):
        self.policy = policy
        self.reference = reference if reference is not None else policy.snapshot()
        self.config = config
        self.engine = engine
        self.optimizer = AdamW(policy.parameters.size, config.adam_betas, config.adam_eps, config.weight_decay)
        self.step = 0

    def build_group(self, record: AccidentRecord, step: int):
        cfg = self.config
        old = self.policy.snapshot()
        x = featurize(record.narrative)
        samples: list[Completion] = old.sample_group(x, cfg.group_size, cfg.sampling,
                                                     completion_rngs(cfg.rng_seed, step, cfg.group_size))
        texts = [decode(c.tokens) for c in samples]
        parsed = [parse_completion(t) for t in texts]
        rewards = self.engine.score_group(texts, record.labels, record.narrative)
        keep = [i for i, c in enumerate(samples) if len(c) > 0]
        if len(keep) < len(samples):
            log.warning("step %d: dropping %d empty completions", step, len(samples) - len(keep))
        toks = [samples[i].tokens for i in keep]
        r = np.array([rewards[i].total for i in keep])
        group = GroupSample(
            prompt_features=x,
            completions=toks,
            logp_new=[self.policy.logprobs(t, x) for t in toks],
            logp_old=[samples[i].logprobs for i in keep],
            logp_ref=[self.reference.logprobs(t, x) for t in toks],
            rewards=r,
            advantages=group_advantages(r, cfg.advantage_std),
        )
        return group, keep, texts, parsed, rewards

    def train_step(self, record: AccidentRecord, step: int | None = None) -> StepReport:
        cfg = self.config
        step = self.step + 1 if step is None else step
        group, keep, texts, parsed, rewards = self.build_group(record, step)
        lr = cosine_lr(step - 1, cfg)
        objective = grpo_objective(group, cfg.clip_epsilon, cfg.kl_beta)
        degenerate = degenerate_group(group.rewards, cfg.advantage_std)
        if degenerate:
            # zero advantages: only weight decay moves the parameters
            grad_norm = 0.0
            self.policy.apply_update(self.optimizer.decay_only(self.policy.parameters), lr)
        else:
            grad = surrogate_gradient(self.policy, group, cfg.clip_epsilon, cfg.kl_beta)
            grad, grad_norm = clip_global_norm(grad, cfg.grad_clip_norm)
            self.policy.apply_update(self.optimizer.direction(self.policy.parameters, grad), lr)
        mean_kl = float(np.mean([kl_estimate(r, n).mean() for r, n in zip(group.logp_ref, group.logp_new)]))
        self.step = step
        adv = dict(zip(keep, group.advantages.tolist()))
        length = dict(zip(keep, (len(c) for c in group.completions)))
        return StepReport(
            step=step,
            ev_id=record.ev_id,
            prompt_digest=digest_text(record.narrative),
            completions=texts,
            lengths=[length.get(i, 0) for i in range(len(texts))],
            parsed_codes=[p.predicted.ordered() for p in parsed],
            invalid_tokens=[sorted(p.invalid_tokens) for p in parsed],
            rewards=rewards,
            advantages=[adv.get(i, 0.0) for i in range(len(texts))],
            objective=float(objective),
            grad_norm=float(grad_norm),
            learning_rate=float(lr),
            mean_kl=mean_kl,
            degenerate=degenerate,
        )

    # --- checkpoints -------------------------------------------------------

    def save_checkpoint(self, path: str | Path, config_digest: str) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            np.savez(
                f,
                version=np.array(CHECKPOINT_VERSION),
                step=np.array(self.step),
                config_digest=np.array(config_digest),
                policy_theta=self.policy.parameters,
                reference_theta=self.reference.parameters,
                hidden_dim=np.array(self.policy.hidden_dim),
                feature_dim=np.array(self.policy.feature_dim),
                vocab=np.array(VOCAB),
                **self.optimizer.state_dict(),
            )
        os.replace(tmp, path)

    def load_checkpoint(self, path: str | Path, config_digest: str | None = None) -> None:
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {int(z['version'])}")
            if config_digest is not None and str(z["config_digest"]) != config_digest:
                raise ValueError(f"{path}: written by config {z['config_digest']}, current is {config_digest}")
            self.policy.parameters[...] = z["policy_theta"]
            self.reference.parameters[...] = z["reference_theta"]
            self.optimizer.load_state_dict(z)
            self.step = int(z["step"])


def checkpoint_path(directory: str | Path, step: int) -> Path:
    return Path(directory) / f"step-{step:06d}.npz"


def latest_checkpoint(directory: str | Path) -> Path | None:
    found = sorted(Path(directory).glob("step-*.npz"))
    return found[-1] if found else None


def prompt_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, 3, epoch]).permutation(n)


def train(
    dataset: Sequence[AccidentRecord],
    config: TrainConfig,
    engine: RewardEngine,
    sinks: Sequence[Callable[[StepReport], None]] = (),
    policy: ToyPolicy | None = None,
    checkpoint_dir: str | Path | None = None,
    config_digest: str | None = None,
    resume_from: str | Path | None = None,
) -> Trainer:
    """Run ``config.max_steps`` GRPO steps over prompts reshuffled each epoch.

    A sink that raises aborts the run; checkpoints already on disk are left
    intact because they are written atomically.
    """
    if not dataset:
        raise ValueError("empty training set")
    digest = config_digest or config.digest()
    if policy is None:
        policy = initial_policy(config)
    trainer = Trainer(policy, config, engine)
    if resume_from is not None:
        trainer.load_checkpoint(resume_from, digest)
    n = len(dataset)
    for step in range(trainer.step + 1, config.max_steps + 1):
        epoch, pos = divmod(step - 1, n)
        record = dataset[int(prompt_order(n, config.rng_seed, epoch)[pos])]
        report = trainer.train_step(record, step)
        for sink in sinks:
            sink(report)
        if checkpoint_dir is not None and step % config.checkpoint_every == 0:
            trainer.save_checkpoint(checkpoint_path(checkpoint_dir, step), digest)
    return trainer
