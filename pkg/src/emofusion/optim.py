"""Adam with L2 (or optionally decoupled) weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, StateError
from .tensor import Tensor

__all__ = ["AdamState", "adam_step", "zero_grad"]


@dataclass
class AdamState:
    """Moments and hyperparameters for one set of parameter tensors.

    ``first_moment[i]`` / ``second_moment[i]`` track ``params[i]``; they are
    created lazily on the first step when left empty.
    """

    learning_rate: float = 1e-4
    weight_decay: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decoupled: bool = False
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")


def adam_step(params: Sequence[Tensor], state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place.

    With ``decoupled=False`` the decay term ``weight_decay * param`` is added
    to the gradient before the moment updates (classic L2).  With
    ``decoupled=True`` it is subtracted from the parameter directly, scaled
    by the learning rate.  Parameters whose ``grad`` is ``None`` are skipped.
    Gradients are left untouched.
    """
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
    if len(state.first_moment) != len(params) or len(state.second_moment) != len(params):
        raise StateError(f"state tracks {len(state.first_moment)} tensors, got {len(params)} params")
    for p, m, v in zip(params, state.first_moment, state.second_moment):
        if m.shape != p.data.shape or v.shape != p.data.shape:
            raise StateError(f"moment shape {m.shape} does not match parameter {p.data.shape}")

    state.step_count += 1
    t = state.step_count
    lr, wd = state.learning_rate, state.weight_decay
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, m, v in zip(params, state.first_moment, state.second_moment):
        if p.grad is None:
            continue
        g = p.grad
        if wd and not state.decoupled:
            g = g + wd * p.data
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        if wd and state.decoupled:
            update = update + wd * p.data
        p.data -= lr * update


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None
