"""Adam, Lookahead, warmup + cosine learning rate, and global-norm clipping."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParameterError, NonFiniteError


def cosine_warmup_lr(step: int, peak: float, warmup: int, total: int) -> float:
    """Linear ramp from 0 over ``warmup`` steps, then cosine decay to 0 at ``total``."""
    if step < warmup:
        return peak * step / warmup
    if total <= warmup:
        return peak if step < total else 0.0
    frac = min(1.0, (step - warmup) / (total - warmup))
    return 0.5 * peak * (1.0 + math.cos(math.pi * frac))


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.vdot(p.grad, p.grad))
    return math.sqrt(total)


def clip_grad_norm(params, max_norm: float = 1.0) -> float:
    """Rescale all gradients jointly when their L2 norm exceeds ``max_norm``.

    Returns the norm before clipping. Raises :class:`NonFiniteError` on NaN/inf.
    """
    named = list(params.items()) if isinstance(params, dict) else [(str(i), p) for i, p in enumerate(params)]
    params = [p for _, p in named]
    norm = global_grad_norm(params)
    if not math.isfinite(norm):
        bad = [name for name, p in named if p.grad is not None and not np.all(np.isfinite(p.grad))]
        raise NonFiniteError(f"non-finite gradient (norm={norm}); offending tensors: {bad[:5]}")
    if norm > max_norm:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, params: dict, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        out = {"t": np.array([self.t], dtype=np.float64)}
        for k in self.params:
            out[f"m/{k}"] = self.m[k]
            out[f"v/{k}"] = self.v[k]
        return out

    def load_state(self, state: dict):
        self.t = int(state["t"][0])
        for k, p in self.params.items():
            self.m[k] = np.asarray(state[f"m/{k}"], dtype=p.data.dtype).reshape(p.data.shape).copy()
            self.v[k] = np.asarray(state[f"v/{k}"], dtype=p.data.dtype).reshape(p.data.shape).copy()


class Lookahead:
    """Lookahead around an inner optimizer: every ``k`` fast steps, slow += alpha * (fast - slow)."""

    def __init__(self, inner: Adam, k: int = 5, alpha: float = 0.5):
        self.inner = inner
        self.k = k
        self.alpha = alpha
        self.counter = 0
        self.slow = {name: p.data.copy() for name, p in inner.params.items()}

    @property
    def params(self):
        return self.inner.params

    def step(self, lr: float | None = None):
        self.inner.step(lr)
        self.counter += 1
        if self.counter % self.k == 0:
            for name, p in self.inner.params.items():
                slow = self.slow[name]
                slow += self.alpha * (p.data - slow)
                p.data[...] = slow

    def state(self) -> dict:
        out = {f"inner/{k}": v for k, v in self.inner.state().items()}
        out["counter"] = np.array([self.counter], dtype=np.float64)
        for k, v in self.slow.items():
            out[f"slow/{k}"] = v
        return out

    def load_state(self, state: dict):
        self.inner.load_state({k[len("inner/"):]: v for k, v in state.items() if k.startswith("inner/")})
        self.counter = int(state["counter"][0])
        for k, p in self.inner.params.items():
            self.slow[k] = np.asarray(state[f"slow/{k}"], dtype=p.data.dtype).reshape(p.data.shape).copy()


def make_optimizer(name: str, params: dict, lr: float):
    if name == "adam":
        return Adam(params, lr=lr)
    if name == "lookahead":
        return Lookahead(Adam(params, lr=lr))
    raise InvalidParameterError(f"unknown optimizer {name!r}")
