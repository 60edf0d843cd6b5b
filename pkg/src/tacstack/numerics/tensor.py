"""Dense tensors with a reverse-mode tape.

Arrays are numpy; the tape, kernels, and gradients are implemented here over a
fixed operator set (conv3d, linear, elementwise nonlinearities, pooling,
concat, interpolation, reductions). Tensors are immutable once produced by an
operation; `backward` accumulates into `.grad` so repeated calls without
`zero_grad` add up.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericsError

_GRAD_ENABLED = True


class no_grad:
    """Context manager disabling tape construction (inference paths)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fns")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._grad_fns = ()

    # -- construction ------------------------------------------------------

    @staticmethod
    def _from_op(data, parents, grad_fns):
        out = Tensor(data)
        if _GRAD_ENABLED:
            kept = [(p, f) for p, f in zip(parents, grad_fns) if p.requires_grad]
            if kept:
                out.requires_grad = True
                out._parents = tuple(p for p, _ in kept)
                out._grad_fns = tuple(f for _, f in kept)
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def check_finite(self, name: str = "tensor") -> "Tensor":
        """Check barrier: NaN/Inf never propagates silently past this."""
        if not np.all(np.isfinite(self.data)):
            raise NumericsError(f"non-finite values in {name}")
        if self.grad is not None and not np.all(np.isfinite(self.grad)):
            raise NumericsError(f"non-finite gradient in {name}")
        return self

    # -- autodiff ----------------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise NumericsError("backward requires a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = g.copy()
                else:
                    node.grad = node.grad + g
                continue
            for p, fn in zip(node._parents, node._grad_fns):
                contrib = fn(g)
                key = id(p)
                if key in grads:
                    grads[key] = grads[key] + contrib
                elif p._parents:
                    grads[key] = contrib
                else:
                    if p.grad is None:
                        p.grad = contrib.copy() if contrib.base is not None else contrib
                    else:
                        p.grad = p.grad + contrib

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return Tensor._from_op(
        out,
        (a, b),
        (lambda g: _unbroadcast(g, a.data.shape), lambda g: _unbroadcast(g, b.data.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return Tensor._from_op(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.data, a.data.shape),
            lambda g: _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    out = a.data ** p
    return Tensor._from_op(out, (a,), (lambda g: g * p * a.data ** (p - 1.0),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise NumericsError("matmul expects 2-D operands")
    out = a.data @ b.data
    return Tensor._from_op(
        out, (a, b), (lambda g: g @ b.data.T, lambda g: a.data.T @ g)
    )


# -- elementwise nonlinearities ----------------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), (lambda g: g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(np.log(a.data), (a,), (lambda g: g / a.data,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._from_op(out, (a,), (lambda g: g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-np.clip(a.data, -500, 500)))
    return Tensor._from_op(out, (a,), (lambda g: g * out * (1.0 - out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._from_op(a.data * mask, (a,), (lambda g: g * mask,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)
    return Tensor._from_op(out, (a,), (lambda g: g * mask,))


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return np.broadcast_to(g, a.data.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.data.shape).copy()

    return Tensor._from_op(out, (a,), (bwd,))


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(tsum(a, axis, keepdims), 1.0 / float(n))


def tmax(a, axis: int, keepdims=False) -> Tensor:
    """Max along one axis; gradient routes to the first maximizer."""
    a = as_tensor(a)
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def bwd(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), gg, axis=axis)
        return full

    return Tensor._from_op(out, (a,), (bwd,))


# -- shape manipulation --------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return Tensor._from_op(a.data.reshape(shape), (a,), (lambda g: g.reshape(old),))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return Tensor._from_op(
        np.transpose(a.data, axes), (a,), (lambda g: np.transpose(g, inv),)
    )


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def make_bwd(i):
        lo, hi = bounds[i], bounds[i + 1]

        def bwd(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]

        return bwd

    return Tensor._from_op(out, tuple(tensors), tuple(make_bwd(i) for i in range(len(tensors))))


def getitem(a, idx) -> Tensor:
    """Basic (non-duplicating) slicing; use gather_rows for fancy indexing."""
    a = as_tensor(a)
    out = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return full

    return Tensor._from_op(out, (a,), (bwd,))


def gather_rows(a, idx: np.ndarray) -> Tensor:
    """Rows of a 2-D tensor at integer indices (duplicates allowed)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    out = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return full

    return Tensor._from_op(out, (a,), (bwd,))


def pad_zero(a, pads) -> Tensor:
    """Zero padding; pads = [(before, after), ...] per axis."""
    a = as_tensor(a)
    out = np.pad(a.data, pads)

    def bwd(g):
        sl = tuple(slice(b, g.shape[i] - e) for i, (b, e) in enumerate(pads))
        return g[sl]

    return Tensor._from_op(out, (a,), (bwd,))


def pad_replicate(a, axis: int, before: int, after: int) -> Tensor:
    """Edge replication along one axis (temporal convs on short sequences)."""
    a = as_tensor(a)
    n = a.data.shape[axis]
    parts = []
    first = np.take(a.data, [0], axis=axis)
    last = np.take(a.data, [n - 1], axis=axis)
    if before:
        parts.append(np.repeat(first, before, axis=axis))
    parts.append(a.data)
    if after:
        parts.append(np.repeat(last, after, axis=axis))
    out = np.concatenate(parts, axis=axis)

    def bwd(g):
        core = np.take(g, np.arange(before, before + n), axis=axis)
        core = core.copy()
        if before:
            head = np.take(g, np.arange(0, before), axis=axis).sum(axis=axis, keepdims=True)
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(0, 1)
            core[tuple(sl)] += head
        if after:
            tail = np.take(g, np.arange(before + n, before + n + after), axis=axis).sum(
                axis=axis, keepdims=True
            )
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(n - 1, n)
            core[tuple(sl)] += tail
        return core

    return Tensor._from_op(out, (a,), (bwd,))


# -- convolution ----------------------------------------------------------------


def _same_pad(n: int, k: int, s: int) -> tuple[int, int]:
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return total // 2, total - total // 2


def conv3d(x, kernel, stride=(1, 1, 1), temporal: str = "causal", spatial: str = "same") -> Tensor:
    """Batched 3-D convolution over (B, T, H, W, Cin) with (kt, kh, kw, Cin, Cout).

    temporal="causal": output index k ends its window at input index
    k*st + st - 1, so outputs never see inputs past their own block; the past
    is zero-padded. temporal="none": no temporal padding (valid windows).
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.data.ndim != 5 or kernel.data.ndim != 5:
        raise NumericsError("conv3d expects (B,T,H,W,Cin) input and 5-D kernel")
    kt, kh, kw, cin, cout = kernel.data.shape
    if x.data.shape[4] != cin:
        raise NumericsError(
            f"conv3d channel mismatch: input {x.data.shape[4]} vs kernel {cin}"
        )
    st, sh, sw = stride
    if x.data.shape[1] == 0:
        raise NumericsError("conv3d: zero-length temporal axis")

    if temporal == "causal":
        pt = kt - st
        if pt >= 0:
            t_pad = (pt, 0)
            t_drop = 0
        else:
            t_pad = (0, 0)
            t_drop = -pt
    elif temporal == "none":
        t_pad = (0, 0)
        t_drop = 0
    else:
        raise NumericsError(f"unknown temporal mode {temporal!r}")

    if spatial == "same":
        ph = _same_pad(x.data.shape[2], kh, sh)
        pw = _same_pad(x.data.shape[3], kw, sw)
    elif spatial == "valid":
        ph = pw = (0, 0)
    else:
        raise NumericsError(f"unknown spatial mode {spatial!r}")

    xp = x
    if t_drop:
        xp = getitem(xp, (slice(None), slice(t_drop, None)))
    pads = [(0, 0), t_pad, ph, pw, (0, 0)]
    if any(p != (0, 0) for p in pads):
        xp = pad_zero(xp, pads)

    xd = xp.data
    tp, hp, wp = xd.shape[1], xd.shape[2], xd.shape[3]
    to = (tp - kt) // st + 1
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    if to <= 0 or ho <= 0 or wo <= 0:
        raise NumericsError("conv3d: kernel larger than padded input")

    win = np.lib.stride_tricks.sliding_window_view(xd, (kt, kh, kw), axis=(1, 2, 3))
    win = win[:, ::st, ::sh, ::sw]  # (B,to,ho,wo,Cin,kt,kh,kw)
    out = np.tensordot(win, kernel.data, axes=([5, 6, 7, 4], [0, 1, 2, 3]))

    kdata = kernel.data

    def bwd_x(g):
        dxp = np.zeros_like(xd)
        for a in range(kt):
            for b in range(kh):
                for c in range(kw):
                    contrib = np.tensordot(g, kdata[a, b, c], axes=([4], [1]))
                    dxp[:, a: a + st * to: st, b: b + sh * ho: sh, c: c + sw * wo: sw, :] += contrib
        return dxp

    def bwd_k(g):
        return np.tensordot(win, g, axes=([0, 1, 2, 3], [0, 1, 2, 3])).transpose(1, 2, 3, 0, 4)

    padded = Tensor._from_op(out, (xp, kernel), (bwd_x, bwd_k))
    return padded


def conv2d(x, kernel, stride=(1, 1), spatial: str = "same") -> Tensor:
    """2-D convolution over (B, H, W, Cin) via the 3-D kernel machinery."""
    x = as_tensor(x)
    kernel = as_tensor(kernel)
    x5 = reshape(x, (x.data.shape[0], 1) + x.data.shape[1:])
    k5 = reshape(kernel, (1,) + kernel.data.shape)
    out = conv3d(x5, k5, stride=(1,) + tuple(stride), temporal="none", spatial=spatial)
    return reshape(out, (out.data.shape[0],) + out.data.shape[2:])


def linear(x, w, b=None) -> Tensor:
    """Affine map on the trailing axis of an arbitrary-rank tensor."""
    x = as_tensor(x)
    din = x.data.shape[-1]
    lead = x.data.shape[:-1]
    flat = reshape(x, (-1, din))
    out = matmul(flat, w)
    if b is not None:
        out = add(out, b)
    return reshape(out, lead + (w.data.shape[-1],))


# -- composed helpers -----------------------------------------------------------


def softmax_pair(a, axis: int) -> Tensor:
    """Numerically stable softmax along `axis` (length-2 use in gating)."""
    a = as_tensor(a)
    shift = Tensor(np.max(a.data, axis=axis, keepdims=True))
    e = exp(a - shift)
    return e / tsum(e, axis=axis, keepdims=True)


def global_max_pool(a, axes: tuple[int, ...]) -> Tensor:
    out = a
    for ax in sorted(axes, reverse=True):
        out = tmax(out, axis=ax)
    return out


def bilinear_interp(grid, coords: np.ndarray) -> Tensor:
    """Sample a (H, W, C) grid at normalized coords (N, 2), align-corners.

    coords[:, 0] in [0,1] spans rows, coords[:, 1] spans columns; gradients
    flow into the four surrounding cells of each query.
    """
    grid = as_tensor(grid)
    h, w, c = grid.data.shape
    r = np.clip(coords[:, 0], 0.0, 1.0) * (h - 1)
    q = np.clip(coords[:, 1], 0.0, 1.0) * (w - 1)
    r0 = np.floor(r).astype(np.intp)
    q0 = np.floor(q).astype(np.intp)
    r0 = np.minimum(r0, h - 2) if h > 1 else np.zeros_like(r0)
    q0 = np.minimum(q0, w - 2) if w > 1 else np.zeros_like(q0)
    r1 = np.minimum(r0 + 1, h - 1)
    q1 = np.minimum(q0 + 1, w - 1)
    fr = (r - r0) if h > 1 else np.zeros_like(r)
    fq = (q - q0) if w > 1 else np.zeros_like(q)

    flat = reshape(grid, (h * w, c))
    g00 = gather_rows(flat, r0 * w + q0)
    g01 = gather_rows(flat, r0 * w + q1)
    g10 = gather_rows(flat, r1 * w + q0)
    g11 = gather_rows(flat, r1 * w + q1)
    w00 = ((1 - fr) * (1 - fq))[:, None]
    w01 = ((1 - fr) * fq)[:, None]
    w10 = (fr * (1 - fq))[:, None]
    w11 = (fr * fq)[:, None]
    return g00 * w00 + g01 * w01 + g10 * w10 + g11 * w11
