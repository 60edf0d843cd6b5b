"""Named parameter sets and the AdamW update."""

from __future__ import annotations

import numpy as np

from ..errors import NumericsError
from .rng import Rng
from .tensor import Tensor


class ParameterSet:
    """Ordered name -> Tensor map with per-parameter optimizer state."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.state: dict[str, dict] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise NumericsError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_scalars(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def check_finite(self) -> None:
        for name, t in self._params.items():
            t.check_finite(name)

    def clip_grad_norm(self, max_norm: float) -> float:
        total = 0.0
        for t in self._params.values():
            if t.grad is not None:
                total += float(np.sum(t.grad * t.grad))
        norm = float(np.sqrt(total))
        if norm > max_norm and norm > 0:
            scale = max_norm / norm
            for t in self._params.values():
                if t.grad is not None:
                    t.grad = t.grad * scale
        return norm

    def merge(self, other: "ParameterSet", prefix: str) -> None:
        for name, t in other.items():
            key = f"{prefix}.{name}"
            if key in self._params:
                raise NumericsError(f"duplicate parameter name {key!r}")
            self._params[key] = t
            if name in other.state:
                self.state[key] = other.state[name]


def glorot(rng: Rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -lim, lim)


def conv_init(rng: Rng, shape) -> np.ndarray:
    """Glorot-scaled init for (k..., Cin, Cout) kernels."""
    receptive = int(np.prod(shape[:-2]))
    return glorot(rng, shape, receptive * shape[-2], receptive * shape[-1])


class AdamW:
    """Decoupled weight decay Adam; step counters live in the parameter set."""

    def __init__(self, params: ParameterSet, lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        if lr < 0:
            raise NumericsError("lr must be >= 0")
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay

    def step(self) -> None:
        b1, b2 = self.betas
        for name, t in self.params.items():
            if t.grad is None:
                raise NumericsError(f"parameter {name!r} has no gradient")
            st = self.params.state.setdefault(
                name,
                {"m": np.zeros_like(t.data), "v": np.zeros_like(t.data), "step": 0},
            )
            st["step"] += 1
            k = st["step"]
            st["m"] = b1 * st["m"] + (1 - b1) * t.grad
            st["v"] = b2 * st["v"] + (1 - b2) * t.grad * t.grad
            mhat = st["m"] / (1 - b1 ** k)
            vhat = st["v"] / (1 - b2 ** k)
            t.data = t.data * (1 - self.lr * self.weight_decay) - self.lr * mhat / (
                np.sqrt(vhat) + self.eps
            )
