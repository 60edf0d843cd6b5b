"""Finite-difference verification of tape gradients.

Every learned module's full loss is run through this before its trainer is
trusted; the checker perturbs each parameter scalar and compares central
differences against the analytic gradient.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericsError
from .optim import ParameterSet


def grad_check(f, params: ParameterSet, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` takes no arguments, returns a scalar Tensor, and must be deterministic
    across calls (seed any randomness inside). Relative error is
    |analytic - cd| / max(|analytic|, |cd|, 1e-8), maximized over scalars.
    """
    if eps <= 0:
        raise NumericsError("eps must be positive")
    params.zero_grad()
    loss = f()
    loss.backward()
    analytic = {}
    for name, t in params.items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"non-finite analytic gradient for {name!r}")
        analytic[name] = g.copy()

    worst = 0.0
    for name, t in params.items():
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f().item()
            flat[i] = orig - eps
            lo = f().item()
            flat[i] = orig
            cd = (hi - lo) / (2 * eps)
            if not np.isfinite(cd):
                raise NumericsError(f"non-finite numeric gradient for {name!r}")
            a = analytic[name].reshape(-1)[i]
            denom = max(abs(a), abs(cd), 1e-8)
            worst = max(worst, abs(a - cd) / denom)
    return worst
