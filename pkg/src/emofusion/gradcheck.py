"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .tensor import Tensor

__all__ = ["relative_error", "check_gradients"]


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max over elements of ``|a - n| / max(|a|, |n|, floor)``.

    ``floor`` keeps near-zero gradients from turning round-off into a large
    ratio; below it the measure becomes an absolute error scaled by ``1/floor``.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
    coords_per_param: int | None = None,
    seed: int = 0,
) -> float:
    """Compare backprop against central differences for every tensor in ``params``.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values.
    With ``coords_per_param`` set, only that many randomly chosen elements of
    each tensor are probed (large tensors).  Returns the worst relative error.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        if coords_per_param is None or coords_per_param >= flat.size:
            coords: Iterable[int] = range(flat.size)
        else:
            coords = rng.choice(flat.size, size=coords_per_param, replace=False)
        idx = np.fromiter(coords, dtype=np.int64)
        numeric = np.empty(idx.size)
        for j, k in enumerate(idx):
            orig = flat[k]
            flat[k] = orig + step
            up = loss_fn().item()
            flat[k] = orig - step
            down = loss_fn().item()
            flat[k] = orig
            numeric[j] = (up - down) / (2 * step)
        worst = max(worst, relative_error(grad.reshape(-1)[idx], numeric))
    for p in params:
        p.grad = None
    return worst
