"""AdamW with decoupled weight decay, and the one-cycle learning-rate schedule."""
from __future__ import annotations

import math

import numpy as np


class AdamW:
    """Adam on a flat parameter vector; ``step`` ascends when ``maximize`` is set."""

    def __init__(self, size: int, weight_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8,
                 maximize: bool = True):
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.maximize = maximize
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        g = -grad if self.maximize else grad
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        out = params * (1 - lr * self.weight_decay)
        return out - lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}


def one_cycle_lr(step: int, total: int, lr_max: float, warm_frac: float = 0.3,
                 start_div: float = 10.0, final_div: float = 1000.0) -> float:
    """Linear ramp lr_max/start_div -> lr_max, then cosine decay to lr_max/final_div.

    ``step`` is 0-based and ``total`` the number of updates in the run.
    """
    if total <= 1:
        return lr_max
    ramp = max(1, int(round(warm_frac * total)))
    lo, hi, end = lr_max / start_div, lr_max, lr_max / final_div
    if step < ramp:
        return lo + (hi - lo) * step / ramp
    span = max(1, total - 1 - ramp)
    frac = min(1.0, (step - ramp) / span)
    return end + (hi - end) * 0.5 * (1 + math.cos(math.pi * frac))
