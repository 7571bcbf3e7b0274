import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hfacs_grpo.grpo.optim import AdamW, clip_global_norm, cosine_lr
from hfacs_grpo.grpo.trainer import TrainConfig


def test_adamw_first_step_by_hand():
    opt = AdamW(3, weight_decay=0.1)
    params = np.array([1.0, -2.0, 0.0])
    g = np.array([0.5, -0.25, 0.0])
    d = opt.direction(params, g)
    # after bias correction m_hat = g and v_hat = g^2
    expected = g / (np.abs(g) + 1e-8) - 0.1 * params
    assert np.allclose(d, expected, rtol=0, atol=1e-15)


def test_adamw_second_step_by_hand():
    opt = AdamW(1, weight_decay=0.0)
    p = np.zeros(1)
    opt.direction(p, np.array([1.0]))
    d = opt.direction(p, np.array([3.0]))
    m = (0.9 * 0.1 * 1 + 0.1 * 3) / (1 - 0.9**2)
    v = (0.999 * 0.001 * 1 + 0.001 * 9) / (1 - 0.999**2)
    assert math.isclose(d[0], m / (math.sqrt(v) + 1e-8), rel_tol=1e-12)


def test_adamw_state_roundtrip():
    a = AdamW(4)
    a.direction(np.ones(4), np.arange(4.0))
    b = AdamW(4)
    b.load_state_dict(a.state_dict())
    g = np.array([1.0, -1.0, 2.0, 0.5])
    assert np.array_equal(a.direction(np.ones(4), g), b.direction(np.ones(4), g))


def test_decay_only():
    assert np.allclose(AdamW(2).decay_only(np.array([1.0, -3.0])), [-0.1, 0.3])


def test_clip_examples():
    g, n = clip_global_norm(np.array([3.0, 4.0]), 0.1)
    assert n == 5.0 and np.isclose(np.linalg.norm(g), 0.1)
    small = np.array([0.03, 0.04])
    g, n = clip_global_norm(small, 0.1)
    assert g is small and math.isclose(n, 0.05)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(1e-3, 10))
def test_clip_never_exceeds_and_keeps_direction(vals, max_norm):
    g = np.array(vals)
    out, _ = clip_global_norm(g, max_norm)
    assert np.linalg.norm(out) <= max_norm * (1 + 1e-12) or np.array_equal(out, g)
    norm = np.linalg.norm(g)
    if norm > 0:
        assert np.allclose(out, g * (np.linalg.norm(out) / norm), rtol=1e-9, atol=1e-300)


def test_cosine_examples():
    cfg = TrainConfig(max_steps=1000, learning_rate=5e-6, warmup_ratio=0.1)
    assert cosine_lr(0, cfg) == 0.0
    assert math.isclose(cosine_lr(50, cfg), 2.5e-6)
    assert math.isclose(cosine_lr(100, cfg), 5e-6)
    assert math.isclose(cosine_lr(550, cfg), 2.5e-6)
    assert cosine_lr(1000, cfg) < 1e-12 * 5e-6
    with pytest.raises(ValueError):
        cosine_lr(1001, cfg)


@given(st.integers(10, 2000), st.floats(0.0, 0.5))
def test_cosine_bounded_and_decaying(T, warm):
    cfg = TrainConfig(max_steps=T, learning_rate=1.0, warmup_ratio=warm)
    lrs = np.array([cosine_lr(s, cfg) for s in range(T + 1)])
    assert np.all(lrs >= 0) and np.all(lrs <= 1.0 + 1e-12)
    peak = int(np.argmax(lrs))
    assert np.all(np.diff(lrs[peak:]) <= 1e-15)
