import math

import numpy as np
import pytest

from votelearn.errors import InvalidParameterError, NonFiniteError
from votelearn.nn.optim import Adam, Lookahead, clip_grad_norm, cosine_warmup_lr, global_grad_norm, make_optimizer
from votelearn.nn.tensor import Tensor


def test_schedule_shape():
    assert cosine_warmup_lr(0, 1e-3, 160, 20000) == 0.0
    assert cosine_warmup_lr(160, 1e-3, 160, 20000) == pytest.approx(1e-3)
    assert cosine_warmup_lr(80, 1e-3, 160, 20000) == pytest.approx(5e-4)
    assert cosine_warmup_lr(20000, 1e-3, 160, 20000) <= 1e-8 * 1e-3
    lrs = [cosine_warmup_lr(s, 1.0, 160, 2000) for s in range(160, 2001)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_clip_to_unit_norm():
    a = Tensor(np.zeros(3), requires_grad=True)
    b = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([6.0, 0.0, 0.0])
    b.grad = np.array([0.0, 8.0])
    pre = clip_grad_norm({"a": a, "b": b}, 1.0)
    assert pre == pytest.approx(10.0)
    assert abs(global_grad_norm([a, b]) - 1.0) <= 1e-9


def test_small_gradients_untouched():
    a = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([0.3, 0.4])
    clip_grad_norm([a], 1.0)
    assert a.grad.tolist() == [0.3, 0.4]


def test_non_finite_gradient_named():
    a = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([np.nan, 1.0])
    with pytest.raises(NonFiniteError, match="bad"):
        clip_grad_norm({"bad": a}, 1.0)


def test_adam_first_step_by_hand():
    # f(w) = w^2 at w = 1: g = 2, m = 0.2, v = 0.004; bias-corrected m/sqrt(v) = 1
    w = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam({"w": w}, lr=0.1)
    w.grad = 2 * w.data
    opt.step()
    expected = 1.0 - 0.1 * 2.0 / (math.sqrt(4.0) + 1e-8)
    assert w.data[0] == pytest.approx(expected, abs=1e-12)


def test_adam_converges_on_quadratic():
    w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"w": w}, lr=0.05)
    for _ in range(500):
        w.grad = 2 * w.data
        opt.step()
    assert np.all(np.abs(w.data) < 1e-2)


def test_lookahead_syncs_every_k():
    w = Tensor(np.array([1.0]), requires_grad=True)
    opt = Lookahead(Adam({"w": w}, lr=0.1), k=5, alpha=0.5)
    shadow = Tensor(np.array([1.0]), requires_grad=True)
    inner = Adam({"w": shadow}, lr=0.1)
    for _ in range(4):
        w.grad = np.array([1.0])
        shadow.grad = np.array([1.0])
        opt.step()
        inner.step()
    assert w.data[0] == shadow.data[0]
    w.grad = np.array([1.0])
    shadow.grad = np.array([1.0])
    opt.step()
    inner.step()
    assert w.data[0] == pytest.approx(1.0 + 0.5 * (shadow.data[0] - 1.0))


def test_state_roundtrip():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = make_optimizer("lookahead", {"w": w}, 0.01)
    for _ in range(7):
        w.grad = np.array([0.5, -0.1])
        opt.step()
    w2 = Tensor(w.data.copy(), requires_grad=True)
    opt2 = make_optimizer("lookahead", {"w": w2}, 0.01)
    opt2.load_state(opt.state())
    for o, t in ((opt, w), (opt2, w2)):
        for _ in range(6):
            t.grad = np.array([0.2, 0.3])
            o.step()
    assert w.data.tobytes() == w2.data.tobytes()
    with pytest.raises(InvalidParameterError):
        make_optimizer("sgd", {"w": w}, 0.1)
