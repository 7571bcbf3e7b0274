"""Group-relative policy optimization over a pluggable policy."""

from .objective import (
    EmptyCompletion,
    clipped_term,
    degenerate_group,
    group_advantages,
    grpo_objective,
    kl_estimate,
    surrogate_gradient,
    token_ratio,
)
from .optim import AdamW, clip_global_norm, cosine_lr
from .policy import Completion, PolicyInterface, SamplingParams, ToyPolicy, featurize, format_prior_policy
from .trainer import GroupSample, StepReport, TrainConfig, Trainer, initial_policy, train

__all__ = [
    "AdamW", "Completion", "EmptyCompletion", "GroupSample", "PolicyInterface", "SamplingParams",
    "StepReport", "ToyPolicy", "TrainConfig", "Trainer", "clip_global_norm", "clipped_term",
    "cosine_lr", "degenerate_group", "featurize", "format_prior_policy", "group_advantages",
    "grpo_objective", "initial_policy", "kl_estimate", "surrogate_gradient", "token_ratio", "train",
]
