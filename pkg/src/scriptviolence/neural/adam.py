"""Adam with bias correction over :class:`ModelParams`-shaped tensors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergedTrainingError


@dataclass
class AdamState:
    step: int
    first_moment: object
    second_moment: object
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate: float = 0.001, **hyper) -> "AdamState":
        return cls(0, params.zeros_like(), params.zeros_like(), learning_rate, **hyper)


def adam_step(params, grads, state: AdamState):
    """Return ``(new_params, new_state)``; inputs are left untouched.

    ``params``/``grads`` only need ``map(fn, *others)`` and ``tensors()``, so
    any of the parameter containers in this package work.
    """
    for name, g in grads.tensors():
        if not np.all(np.isfinite(g)):
            raise DivergedTrainingError(f"non-finite gradient in {name}")
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    m = state.first_moment.map(lambda m_, g: b1 * m_ + (1 - b1) * g, grads)
    v = state.second_moment.map(lambda v_, g: b2 * v_ + (1 - b2) * g * g, grads)
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    lr, eps = state.learning_rate, state.epsilon
    new = params.map(lambda p, m_, v_: p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps), m, v)
    return new, AdamState(t, m, v, lr, b1, b2, eps)
