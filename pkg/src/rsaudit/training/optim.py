"""Full-batch optimizers over a flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    """Optimizer and stopping rule.

    Training stops after ``steps`` updates, or earlier once the best loss
    seen has not improved by more than ``min_improvement`` for ``patience``
    consecutive steps.
    """

    kind: str = "momentum"
    lr: float = 0.1
    momentum: float = 0.9
    steps: int = 5000
    patience: int = 100
    min_improvement: float = 1e-9
    init_sigma: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0 or self.steps < 0 or self.patience < 1:
            raise ValueError("invalid optimizer settings")

    def make(self, size: int):
        return Momentum(self, size) if self.kind == "momentum" else Adam(self, size)


class Momentum:
    """Heavy-ball momentum: ``v <- mu v + grad``, ``theta <- theta - lr v``."""

    def __init__(self, config: OptimizerConfig, size: int):
        self.config = config
        self.velocity = np.zeros(size)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.velocity = self.config.momentum * self.velocity + grad
        return params - self.config.lr * self.velocity


class Adam:
    """Adaptive moments with bias correction."""

    def __init__(self, config: OptimizerConfig, size: int):
        self.config = config
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        c = self.config
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1 - c.beta2) * grad * grad
        m_hat = self.m / (1 - c.beta1 ** self.t)
        v_hat = self.v / (1 - c.beta2 ** self.t)
        return params - c.lr * m_hat / (np.sqrt(v_hat) + c.eps)
