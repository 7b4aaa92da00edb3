"""Parameter updates: AdamW with linear warmup into cosine decay, plus plain SGD.

The schedule is linear from 0 to the peak rate over ``warmup_steps``, then
``peak * 0.5 * (1 + cos(pi * progress))`` down to 0 at ``total_steps``.
Weight decay is decoupled from the gradient term and is applied at its own
fixed rate, independent of the scheduled learning rate.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, NumericalError


class AdamW:
    """Adaptive moment estimation with decoupled weight decay.

    Holds per-parameter first/second moment buffers keyed by parameter name
    and a monotone step counter.
    """

    def __init__(self, peak_lr, warmup_steps, total_steps, weight_decay=0.0,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if total_steps < 1 or warmup_steps < 0 or warmup_steps > total_steps:
            raise ConfigError(
                f"bad schedule: warmup_steps={warmup_steps}, total_steps={total_steps}")
        self.peak_lr = float(peak_lr)
        self.warmup_steps = int(warmup_steps)
        self.total_steps = int(total_steps)
        self.weight_decay = float(weight_decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = {}
        self.v = {}

    def lr_at(self, step):
        """Scheduled learning rate at a given step index."""
        if step < self.warmup_steps:
            return self.peak_lr * step / self.warmup_steps
        span = self.total_steps - self.warmup_steps
        progress = (step - self.warmup_steps) / span if span > 0 else 1.0
        progress = min(progress, 1.0)
        return self.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))

    def step(self, params, grads):
        """Update parameters in place.

        ``params`` maps name -> Tensor, ``grads`` maps name -> ndarray.
        Parameters without a gradient entry are treated as zero-gradient
        (they still receive weight decay).  Any non-finite gradient refuses
        the whole step.
        """
        if self.step_count >= self.total_steps:
            raise ConfigError(
                f"optimizer exhausted: step {self.step_count} >= total {self.total_steps}")
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for parameter {name!r}")
        lr = self.lr_at(self.step_count)
        t = self.step_count + 1
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(p.values)
            if name not in self.m:
                self.m[name] = np.zeros_like(p.values)
                self.v[name] = np.zeros_like(p.values)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.values
            p.values -= update
        self.step_count = t


def sgd_step(params, grads, lr):
    """One plain SGD update; refuses the step on non-finite gradients."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name!r}")
    for name, p in params.items():
        g = grads.get(name)
        if g is not None:
            p.values -= lr * g
