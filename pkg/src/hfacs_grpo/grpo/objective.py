"""Group-relative advantages, the clipped surrogate with KL penalty, and its
exact gradient."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .policy import PolicyInterface
    from .trainer import GroupSample

log = logging.getLogger(__name__)

STD_FLOOR = 1e-8
EXP_CLAMP = 50.0


class EmptyCompletion(ValueError):
    pass


def degenerate_group(rewards, std: str = "population") -> bool:
    r = np.asarray(rewards, dtype=float)
    return bool(r.std(ddof=0 if std == "population" else 1) < STD_FLOOR)


def group_advantages(rewards, std: str = "population") -> np.ndarray:
    """(r - mean) / std over the group; all zeros when the group has no spread."""
    r = np.asarray(rewards, dtype=float)
    if r.size < 2:
        raise ValueError("group needs at least two rewards")
    if std not in ("population", "sample"):
        raise ValueError(f"unknown std variant {std!r}")
    sd = r.std(ddof=0 if std == "population" else 1)
    if sd < STD_FLOOR:
        return np.zeros_like(r)
    return (r - r.mean()) / sd


def token_ratio(logp_new, logp_old):
    return np.exp(np.clip(np.subtract(logp_new, logp_old), -EXP_CLAMP, EXP_CLAMP))


def clipped_term(ratio, advantage, eps: float):
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def kl_estimate(logp_ref, logp_new):
    """exp(d) - d - 1 with d = logp_ref - logp_new; non-negative, zero iff equal."""
    d = np.clip(np.subtract(logp_ref, logp_new), -EXP_CLAMP, EXP_CLAMP)
    return np.expm1(d) - d


def _check_nonempty(group: "GroupSample") -> None:
    for i, toks in enumerate(group.completions):
        if len(toks) == 0:
            raise EmptyCompletion(f"completion {i} has no tokens")


def grpo_objective(group: "GroupSample", eps: float, beta: float, logp_new=None) -> float:
    """Mean over completions of the per-token mean of clipped surrogate minus
    ``beta`` times the KL estimate. Each completion's advantage is broadcast
    to all of its tokens."""
    _check_nonempty(group)
    logp_new = group.logp_new if logp_new is None else logp_new
    total = 0.0
    for i in range(len(group.completions)):
        ratio = token_ratio(logp_new[i], group.logp_old[i])
        per_tok = clipped_term(ratio, group.advantages[i], eps) - beta * kl_estimate(group.logp_ref[i], logp_new[i])
        total += per_tok.mean()
    return total / len(group.completions)


def objective_at(policy: "PolicyInterface", group: "GroupSample", eps: float, beta: float) -> float:
    """Objective with the current-policy log-probs recomputed from ``policy``."""
    new = [policy.logprobs(t, group.prompt_features) for t in group.completions]
    return grpo_objective(group, eps, beta, logp_new=new)


def token_weights(group: "GroupSample", logp_new, eps: float, beta: float) -> list[np.ndarray]:
    """d objective / d logp_new for every token."""
    G = len(group.completions)
    weights = []
    for i in range(G):
        A = float(group.advantages[i])
        diff = np.subtract(logp_new[i], group.logp_old[i])
        ratio = token_ratio(logp_new[i], group.logp_old[i])
        # The unclipped branch carries gradient when it is the (weak) minimum;
        # otherwise min() picks the constant clipped value.
        lo, hi = 1.0 - eps, 1.0 + eps
        unclipped_active = ratio * A <= np.clip(ratio, lo, hi) * A
        live = unclipped_active & (np.abs(diff) < EXP_CLAMP)
        g_surr = np.where(live, ratio * A, 0.0)
        d = np.subtract(group.logp_ref[i], logp_new[i])
        # d/dlogp_new of exp(d) - d - 1 = 1 - exp(d)
        g_kl = np.where(np.abs(d) < EXP_CLAMP, 1.0 - np.exp(np.clip(d, -EXP_CLAMP, EXP_CLAMP)), 0.0)
        weights.append((g_surr - beta * g_kl) / (len(group.completions[i]) * G))
    return weights


def surrogate_gradient(policy: "PolicyInterface", group: "GroupSample", eps: float, beta: float) -> np.ndarray:
    """Exact gradient of the objective w.r.t. the policy's parameters."""
    _check_nonempty(group)
    new = [policy.logprobs(t, group.prompt_features) for t in group.completions]
    w = token_weights(group, new, eps, beta)
    return policy.logprob_grad(group.completions, group.prompt_features, w)
