"""Central finite-difference checking for the autodiff core."""
import numpy as np

from votelearn.nn.tensor import Tensor

STEP = 1e-5
# gradient entries smaller than FLOOR times the largest gradient entry of
# the whole check are compared on that absolute scale instead
FLOOR = 1e-6


def rel_error(analytic, numeric, scale=None) -> float:
    a, n = np.ravel(analytic), np.ravel(numeric)
    if scale is None:
        scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0))
    floor = FLOOR * max(scale, 1e-12)
    return float((np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)).max(initial=0.0))


def check(fn, inputs, rng, coords=None, step=STEP) -> float:
    """Max relative error between backward() and central differences.

    ``fn`` maps the list of input Tensors to an output Tensor; the scalar
    checked is ``sum(out * R)`` with a fixed random ``R``. ``coords`` limits
    the number of finite-difference coordinates per input (random subset).
    """
    out = fn(inputs)
    R = rng.standard_normal(out.shape)
    for t in inputs:
        t.grad = None
    loss = (out * Tensor(R)).sum()
    loss.backward()
    pairs = []
    for t in inputs:
        if not t.requires_grad:
            continue
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if coords is not None and flat.size > coords:
            idx = rng.choice(flat.size, size=coords, replace=False)
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            old = flat[i]
            flat[i] = old + step
            up = float((fn(inputs).data * R).sum())
            flat[i] = old - step
            down = float((fn(inputs).data * R).sum())
            flat[i] = old
            numeric[j] = (up - down) / (2 * step)
        analytic = (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1)[idx]
        pairs.append((analytic, numeric))
    scale = max((max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0)) for a, n in pairs), default=0.0)
    return max((rel_error(a, n, scale) for a, n in pairs), default=0.0)


def leaf(rng, *shape, low=-1.0, high=1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def away_from_zero(rng, *shape, gap=0.05) -> Tensor:
    """Uniform entries with |x| >= gap, so kinks at 0 stay out of the difference stencil."""
    x = rng.uniform(gap, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)
    return Tensor(x, requires_grad=True)
