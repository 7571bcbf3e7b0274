"""AdamW with decoupled weight decay, global-norm clipping, cosine schedule."""

from __future__ import annotations

import math

import numpy as np


class AdamW:
    """Produces ascent directions; the caller scales by the learning rate.

    ``direction`` returns m_hat / (sqrt(v_hat) + eps) - weight_decay * params,
    so ``params += lr * direction`` is the usual decoupled AdamW update.
    """

    def __init__(self, size: int, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.1):
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def direction(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return m_hat / (np.sqrt(v_hat) + self.eps) - self.weight_decay * params

    def decay_only(self, params: np.ndarray) -> np.ndarray:
        return -self.weight_decay * params

    def state_dict(self) -> dict[str, np.ndarray]:
        return {"adam_m": self.m.copy(), "adam_v": self.v.copy(), "adam_t": np.array(self.t)}

    def load_state_dict(self, state) -> None:
        self.m = np.array(state["adam_m"], dtype=float)
        self.v = np.array(state["adam_v"], dtype=float)
        self.t = int(state["adam_t"])


def clip_global_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def cosine_lr(step: int, config) -> float:
    """Linear warmup to the base rate, then cosine decay to 0 at ``max_steps``."""
    base, total = config.learning_rate, config.max_steps
    if not 0 <= step <= total:
        raise ValueError(f"step {step} outside [0, {total}]")
    warmup = config.warmup_ratio * total
    if step < warmup:
        return base * step / warmup
    if total <= warmup:
        return base
    progress = (step - warmup) / (total - warmup)
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))
