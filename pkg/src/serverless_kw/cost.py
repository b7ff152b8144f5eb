"""Instant cost of a platform state and the penalized cost seen by the optimizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .policy import SmoothingSpec, penalty

__all__ = ["CostWeights", "REFERENCE_WEIGHTS", "instant_cost", "cost_vector", "sample_cost"]


@dataclass(frozen=True)
class CostWeights:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 5.0
    w4: float = 100.0
    w_rej: float = 1000.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"cost weight {name} must be >= 0, got {value!r}")

    @property
    def per_component(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4])

    def bound(self, N: int) -> float:
        """Upper bound of :func:`instant_cost` over the states of capacity ``N``."""
        return float(self.per_component.sum() * N + self.w_rej)


REFERENCE_WEIGHTS = CostWeights()


def instant_cost(x, w: CostWeights, N: int) -> float:
    x1, x2, x3, x4 = x
    c = w.w1 * x1 + w.w2 * x2 + w.w3 * x3 + w.w4 * x4
    if x2 + x4 == N:
        c += w.w_rej
    return float(c)


def cost_vector(states: np.ndarray, w: CostWeights, N: int) -> np.ndarray:
    """:func:`instant_cost` over an ``(S, 4)`` array of states."""
    states = np.asarray(states)
    c = states @ w.per_component
    return c + w.w_rej * (states[:, 1] + states[:, 3] == N)


def sample_cost(theta: float, x, w: CostWeights, spec: SmoothingSpec, N: int) -> float:
    """Cost observed by the optimizer: instant cost plus the reserve penalty."""
    return instant_cost(x, w, N) + penalty(theta, spec)
