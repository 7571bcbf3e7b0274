"""Policy contract and a small two-layer tanh reference policy.

The toy policy emits one token at a time from a 30-token vocabulary. Its
state is the hashed narrative features concatenated with a one-hot of the
previous token, so it is a narrative-conditioned first-order Markov chain.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ..parsing import CLOSE_TAG, OPEN_TAG
from ..taxonomy import CODE_NAMES
from ..toy_task import CODE_KEYWORDS

BOS, EOS = "<bos>", "<eos>"
FILLER_WORDS = (
    *CODE_KEYWORDS.values(),
    "pilot", "aircraft", "because", "during",
    "AE300", "PC400",  # code-shaped but outside the taxonomy
)
VOCAB: tuple[str, ...] = (BOS, OPEN_TAG, CLOSE_TAG, EOS, *FILLER_WORDS, *CODE_NAMES)
TOKEN_ID = {t: i for i, t in enumerate(VOCAB)}
BOS_ID, EOS_ID = TOKEN_ID[BOS], TOKEN_ID[EOS]
FEATURE_DIM = 64


def _bucket(token: str, dim: int) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode(), digest_size=8).digest(), "big") % dim


def featurize(narrative: str, dim: int = FEATURE_DIM) -> np.ndarray:
    """Hashed bag of lowercased words, L2-normalized."""
    x = np.zeros(dim)
    for tok in narrative.lower().split():
        x[_bucket(tok, dim)] += 1.0
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def decode(tokens: Sequence[int]) -> str:
    return " ".join(VOCAB[t] for t in tokens if t not in (EOS_ID, BOS_ID))


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 16


@dataclass
class Completion:
    tokens: np.ndarray    # int ids, EOS included when emitted
    logprobs: np.ndarray  # per-token log-probability under the sampling policy

    def __len__(self) -> int:
        return len(self.tokens)


class PolicyInterface(Protocol):
    def sample_group(self, features: np.ndarray, group_size: int, params: SamplingParams,
                     rngs: Sequence[np.random.Generator]) -> list[Completion]: ...

    def logprobs(self, tokens: np.ndarray, features: np.ndarray) -> np.ndarray: ...

    def logprob_grad(self, sequences: Sequence[np.ndarray], features: np.ndarray,
                     weights: Sequence[np.ndarray]) -> np.ndarray:
        """Gradient of sum_i sum_t weights[i][t] * logprob(token i,t)."""
        ...

    def snapshot(self) -> "PolicyInterface": ...

    def apply_update(self, gradient: np.ndarray, learning_rate: float) -> None: ...

    @property
    def parameters(self) -> np.ndarray: ...


def _nucleus(probs: np.ndarray, top_p: float) -> np.ndarray:
    if top_p >= 1.0:
        return probs
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    keep = order[: int(np.searchsorted(cum, top_p)) + 1]
    out = np.zeros_like(probs)
    out[keep] = probs[keep]
    return out / out.sum()


class ToyPolicy:
    """Two-layer tanh network over (narrative features, previous token)."""

    def __init__(self, theta: np.ndarray | None = None, hidden_dim: int = 32,
                 feature_dim: int = FEATURE_DIM, seed: int = 0, init_scale: float = 1.0,
                 feature_scale: float = 1.0):
        self.hidden_dim = hidden_dim
        self.feature_dim = feature_dim
        self.vocab_size = len(VOCAB)
        self.state_dim = feature_dim + self.vocab_size
        h, s, v = hidden_dim, self.state_dim, self.vocab_size
        self._shapes = {"W1": (h, s), "b1": (h,), "W2": (v, h), "b2": (v,)}
        size = sum(int(np.prod(sh)) for sh in self._shapes.values())
        if theta is None:
            rng = np.random.default_rng(seed)
            theta = np.zeros(size)
            self.theta = theta
            self._bind()
            self.W1[...] = rng.normal(0.0, init_scale / np.sqrt(s), (h, s))
            self.W1[:, :feature_dim] *= feature_scale
            self.W2[...] = rng.normal(0.0, init_scale / np.sqrt(h), (v, h))
        else:
            theta = np.array(theta, dtype=np.float64)
            if theta.shape != (size,):
                raise ValueError(f"expected {size} parameters, got {theta.shape}")
            self.theta = theta
            self._bind()
        self._mask = np.zeros(v)
        self._mask[BOS_ID] = -np.inf  # BOS only ever conditions, never emitted

    def _bind(self) -> None:
        off = 0
        for name, shape in self._shapes.items():
            n = int(np.prod(shape))
            setattr(self, name, self.theta[off:off + n].reshape(shape))
            off += n

    @property
    def parameters(self) -> np.ndarray:
        return self.theta

    def states(self, tokens: Sequence[int], features: np.ndarray) -> np.ndarray:
        prev = np.concatenate([[BOS_ID], np.asarray(tokens[:-1], dtype=int)]) if len(tokens) else np.zeros(0, int)
        X = np.zeros((len(prev), self.state_dim))
        X[:, : self.feature_dim] = features
        X[np.arange(len(prev)), self.feature_dim + prev] = 1.0
        return X

    def _forward(self, X: np.ndarray):
        H = np.tanh(X @ self.W1.T + self.b1)
        logits = H @ self.W2.T + self.b2 + self._mask
        logits = logits - logits.max(axis=-1, keepdims=True)
        logZ = np.log(np.exp(logits).sum(axis=-1, keepdims=True))
        return H, logits - logZ

    def distribution(self, prev_token: int, features: np.ndarray) -> np.ndarray:
        X = self.states([prev_token, 0], features)[1:]
        return np.exp(self._forward(X)[1][0])

    def sample_group(self, features, group_size, params, rngs):
        if len(rngs) != group_size:
            raise ValueError("need one RNG stream per completion")
        return [self.sample(features, params, rng) for rng in rngs]

    def sample(self, features: np.ndarray, params: SamplingParams, rng: np.random.Generator) -> Completion:
        tokens, lps = [], []
        prev = BOS_ID
        for _ in range(params.max_tokens):
            X = self.states([prev, 0], features)[1:]
            H = np.tanh(X[0] @ self.W1.T + self.b1)
            logits = H @ self.W2.T + self.b2 + self._mask
            logp = logits - logits.max()
            logp = logp - np.log(np.exp(logp).sum())
            if params.temperature == 1.0:
                probs = np.exp(logp)
            else:
                z = logp / params.temperature
                z = z - z.max()
                probs = np.exp(z) / np.exp(z).sum()
            probs = _nucleus(probs, params.top_p)
            tok = int(rng.choice(self.vocab_size, p=probs))
            tokens.append(tok)
            lps.append(float(logp[tok]))
            prev = tok
            if tok == EOS_ID:
                break
        return Completion(np.array(tokens, dtype=int), np.array(lps))

    def logprobs(self, tokens, features):
        tokens = np.asarray(tokens, dtype=int)
        if len(tokens) == 0:
            return np.zeros(0)
        _, logp = self._forward(self.states(tokens, features))
        return logp[np.arange(len(tokens)), tokens]

    def logprob_grad(self, sequences, features, weights):
        seqs = [np.asarray(s, dtype=int) for s in sequences if len(s)]
        ws = [np.asarray(w, dtype=float) for s, w in zip(sequences, weights) if len(s)]
        grad = np.zeros_like(self.theta)
        if not seqs:
            return grad
        X = np.concatenate([self.states(s, features) for s in seqs])
        toks = np.concatenate(seqs)
        w = np.concatenate(ws)
        H, logp = self._forward(X)
        P = np.exp(logp)
        # d logp[tok] / d logits = onehot(tok) - P
        dlogits = -P * w[:, None]
        dlogits[np.arange(len(toks)), toks] += w
        dlogits[:, BOS_ID] = 0.0
        out = self._view(grad)
        out["W2"][...] = dlogits.T @ H
        out["b2"][...] = dlogits.sum(axis=0)
        dpre = (dlogits @ self.W2) * (1.0 - H**2)
        out["W1"][...] = dpre.T @ X
        out["b1"][...] = dpre.sum(axis=0)
        return grad

    def _view(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        views, off = {}, 0
        for name, shape in self._shapes.items():
            n = int(np.prod(shape))
            views[name] = flat[off:off + n].reshape(shape)
            off += n
        return views

    def snapshot(self) -> "ToyPolicy":
        return ToyPolicy(self.theta.copy(), self.hidden_dim, self.feature_dim)

    def apply_update(self, gradient: np.ndarray, learning_rate: float) -> None:
        self.theta += learning_rate * gradient

    def save(self, path: str | Path, **meta) -> None:
        np.savez(path, theta=self.theta, hidden_dim=self.hidden_dim, feature_dim=self.feature_dim,
                 vocab=np.array(VOCAB), **meta)

    @classmethod
    def load(cls, path: str | Path) -> "ToyPolicy":
        with np.load(path, allow_pickle=False) as z:
            if tuple(z["vocab"].tolist()) != VOCAB:
                raise ValueError(f"{path}: vocabulary mismatch")
            key = "policy_theta" if "policy_theta" in z else "theta"
            return cls(z[key], int(z["hidden_dim"]), int(z["feature_dim"]))


GENERIC_FILLERS = ("pilot", "aircraft", "because", "during")
HALLUCINATED = ("AE300", "PC400")


def template_completion(rng: np.random.Generator, reasoning_words: int = 1,
                        code_count_probs=(0.6, 0.3, 0.1), hallucination_rate: float = 0.15) -> list[int]:
    """A well-formatted completion with random reasoning words and random codes."""
    words = list(GENERIC_FILLERS) + list(CODE_KEYWORDS.values())
    toks = [OPEN_TAG] + list(rng.choice(words, size=int(rng.integers(1, reasoning_words + 1))))
    toks.append(CLOSE_TAG)
    n_codes = 1 + int(rng.choice(len(code_count_probs), p=code_count_probs))
    toks += list(rng.choice(CODE_NAMES, size=n_codes, replace=False))
    if rng.random() < hallucination_rate:
        toks.insert(int(rng.integers(len(toks) - 1, len(toks) + 1)), str(rng.choice(HALLUCINATED)))
    return [TOKEN_ID[t] for t in toks] + [EOS_ID]


def format_prior_policy(seed: int = 0, hidden_dim: int = 32, steps: int = 200, batch: int = 32,
                        learning_rate: float = 1e-2, feature_scale: float = 16.0,
                        reasoning_words: int = 1, freeze_narrative: bool = True) -> ToyPolicy:
    """A ToyPolicy fitted by maximum likelihood to narrative-agnostic template
    completions: it knows the output format but not which codes apply.

    Plays the role of an instruction-tuned base model before RL. With
    ``freeze_narrative`` the input-feature weights keep their random init, so
    the fit cannot learn to ignore the narrative.
    """
    from ..toy_task import make_narrative
    from .optim import AdamW

    rng = np.random.default_rng([seed, 7])
    policy = ToyPolicy(hidden_dim=hidden_dim, seed=seed, feature_scale=feature_scale)
    opt = AdamW(policy.parameters.size, weight_decay=0.0)
    for _ in range(steps):
        grad = np.zeros_like(policy.parameters)
        for _ in range(batch):
            labels = rng.choice(CODE_NAMES, size=int(rng.integers(1, 3)), replace=False)
            x = featurize(make_narrative(labels, rng))
            seq = np.array(template_completion(rng, reasoning_words))
            grad += policy.logprob_grad([seq], x, [np.full(len(seq), 1.0 / (len(seq) * batch))])
        if freeze_narrative:
            policy._view(grad)["W1"][:, :policy.feature_dim] = 0.0
        policy.apply_update(opt.direction(policy.parameters, grad), learning_rate)
    return policy
