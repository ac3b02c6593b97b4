"""
Adam optimizer over flat parameter dictionaries.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from pydantic import BaseModel, Field

from utils.core.exceptions import DimensionError


class AdamConfig(BaseModel):
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps_hat: float = Field(1e-8, gt=0)


@dataclass
class AdamState:
    """First and second moment estimates per key and the step counter."""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    state: AdamState,
    grads: Dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_hat: float = 1e-8,
) -> Tuple[AdamState, Dict[str, np.ndarray]]:
    """
    One bias-corrected Adam update.

    Returns:
        Tuple[AdamState, Dict[str, np.ndarray]]: The new state and the parameter
        increments (to be added to the parameters)
    """
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    m, v, updates = {}, {}, {}
    for key, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        m_prev = state.m.get(key, np.zeros_like(g))
        v_prev = state.v.get(key, np.zeros_like(g))
        if m_prev.shape != g.shape:
            raise DimensionError(f"Gradient for {key} has shape {g.shape}, state has {m_prev.shape}",
                                 error_code="SHAPE_MISMATCH")
        m[key] = beta1 * m_prev + (1.0 - beta1) * g
        v[key] = beta2 * v_prev + (1.0 - beta2) * (g * g)
        updates[key] = -lr * (m[key] / bc1) / (np.sqrt(v[key] / bc2) + eps_hat)
    return AdamState(m={**state.m, **m}, v={**state.v, **v}, t=t), updates


class Adam:
    """Stateful wrapper updating a dict of writable arrays in place."""

    def __init__(self, lr: float = 0.001, config: AdamConfig = None):
        self.lr = lr
        self.config = config or AdamConfig()
        self.state = AdamState()

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        self.state, updates = adam_step(self.state, grads, self.lr, self.config.beta1, self.config.beta2,
                                        self.config.eps_hat)
        for key, delta in updates.items():
            params[key] += delta
