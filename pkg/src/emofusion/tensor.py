"""Dense float64 tensors with reverse-mode automatic differentiation.

Only the operations the fusion network needs are provided.  Every op that
receives at least one input with ``requires_grad`` records a backward closure
on its output; :meth:`Tensor.backward` replays those closures in reverse
topological order.  Ops on inputs that do not require gradients record
nothing, so inference builds no graph.

Layout conventions
------------------
* ``conv2d`` / ``maxpool2d`` take ``C x H x W`` or a batched ``B x C x H x W``.
* ``linear`` takes a vector of length ``n`` or a batch ``B x n``.
* ``softmax`` / ``cross_entropy`` take a score vector or a ``B x L`` batch.

``conv2d`` computes a cross-correlation (the kernel is not flipped).  Learned
kernels make the two orientations equivalent; a flipped kernel turns one into
the other.  ``conv1d`` computes the true convolution sum
``out[i] = sum_k h[k] f[i - k]`` with the kernel centred on ``k = 0``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, NumericError, ShapeError, UsageError

__all__ = [
    "Tensor",
    "as_tensor",
    "conv1d",
    "conv2d",
    "maxpool2d",
    "linear",
    "relu",
    "softmax",
    "cross_entropy",
    "softmax_cross_entropy",
    "concat",
    "flatten",
    "PROB_FLOOR",
]

PROB_FLOOR = 1e-15

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """An n-dimensional float64 array that can take part in autodiff.

    ``data`` is a row-major numpy array; ``grad`` is ``None`` until a backward
    pass reaches this tensor, after which it has the same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 0 and 0 in arr.shape:
            raise ShapeError(f"tensor extents must be positive, got {arr.shape}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- elementwise arithmetic (same shape or scalar) ---------------------
    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        _check_binary(self, other, "add")

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return Tensor._from_op(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        _check_binary(self, other, "mul")
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g * b, self.shape), _unbroadcast(g * a, other.shape)

        return Tensor._from_op(a * b, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        if other.size != 1:
            raise ShapeError("division is only supported by a scalar")
        return self * (1.0 / other.data.reshape(()))

    def sum(self) -> "Tensor":
        shape = self.shape
        return Tensor._from_op(np.asarray(self.data.sum()), (self,), lambda g: (np.broadcast_to(g, shape).copy(),))

    def mean(self) -> "Tensor":
        return self.sum() / float(self.size)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape
        try:
            out = self.data.reshape(shape)
        except ValueError as exc:
            raise ShapeError(str(exc)) from None
        return Tensor._from_op(out, (self,), lambda g: (g.reshape(src),))

    def __getitem__(self, index) -> "Tensor":
        src = self.shape

        def backward(g):
            full = np.zeros(src)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._from_op(np.array(self.data[index]), (self,), backward)

    # -- autodiff ----------------------------------------------------------
    def backward(self) -> None:
        """Accumulate ``d self / d leaf`` into ``leaf.grad`` for every leaf.

        ``self`` must hold exactly one element.  Calling twice without
        resetting leaf gradients accumulates.
        """
        if self.data.size != 1:
            raise UsageError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise UsageError("loss does not depend on any tensor with requires_grad")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        upstream: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = upstream.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                upstream[key] = pg if key not in upstream else upstream[key] + pg


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def conv1d(signal: Tensor, kernel: Tensor, padding: int = 0) -> Tensor:
    """1-D convolution ``out[i] = sum_{k=-T}^{T} h[k] f[i-k]`` over a zero-padded signal.

    The kernel has odd length ``2T + 1``; output length is
    ``len(signal) + 2 * padding - len(kernel) + 1``.
    """
    signal, kernel = as_tensor(signal), as_tensor(kernel)
    if signal.ndim != 1 or kernel.ndim != 1:
        raise ShapeError("conv1d expects rank-1 signal and kernel")
    if padding < 0:
        raise ConfigError("padding must be non-negative")
    k = kernel.size
    if k % 2 == 0:
        raise ConfigError(f"conv1d kernel length must be odd, got {k}")
    fp = np.pad(signal.data, padding)
    if k > fp.size:
        raise ShapeError(f"kernel length {k} exceeds padded signal length {fp.size}")
    h = kernel.data
    out = np.convolve(fp, h, mode="valid")

    def backward(g):
        d_fp = np.convolve(g, h[::-1], mode="full")
        d_sig = d_fp[padding:padding + signal.size] if padding else d_fp
        d_h = np.correlate(fp, g, mode="valid")[::-1]
        return d_sig, d_h

    return Tensor._from_op(out, (signal, kernel), backward)


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """Patch matrix of shape ``(C*kh*kw, oh*ow)`` for one padded ``C x Hp x Wp`` image."""
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, : (oh - 1) * stride + 1 : stride, : (ow - 1) * stride + 1 : stride]
    return win.transpose(0, 3, 4, 1, 2).reshape(-1, oh * ow)


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Multi-channel 2-D cross-correlation plus per-filter bias.

    ``x`` is ``C x H x W`` (or ``B x C x H x W``), ``kernels`` is
    ``F x C x Kh x Kw`` with odd ``Kh``/``Kw``, ``bias`` has length ``F``.
    """
    x, kernels, bias = as_tensor(x), as_tensor(kernels), as_tensor(bias)
    if kernels.ndim != 4:
        raise ShapeError(f"kernels must be rank-4 F x C x Kh x Kw, got {kernels.shape}")
    batched = x.ndim == 4
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d input must be C x H x W or B x C x H x W, got {x.shape}")
    if stride < 1:
        raise ConfigError("stride must be positive")
    if padding < 0:
        raise ConfigError("padding must be non-negative")
    xb = x.data if batched else x.data[None]
    n, c, h, w = xb.shape
    f, kc, kh, kw = kernels.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError(f"kernel extents must be odd, got {kh}x{kw}")
    if kc != c:
        raise ShapeError(f"input has {c} channels but kernels expect {kc}")
    if bias.shape != (f,):
        raise ShapeError(f"bias must have shape ({f},), got {bias.shape}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1

    wmat = kernels.data.reshape(f, -1)
    pad = ((0, 0), (padding, padding), (padding, padding))
    out = np.empty((n, f, oh, ow))
    for i in range(n):
        cols = _windows(np.pad(xb[i], pad), kh, kw, stride, oh, ow)
        out[i] = (wmat @ cols).reshape(f, oh, ow)
    out += bias.data[None, :, None, None]

    def backward(g):
        gb = g if batched else g[None]
        d_w = np.zeros_like(wmat) if kernels.requires_grad else None
        d_x = np.empty_like(xb) if x.requires_grad else None
        hs = stride * (oh - 1) + 1
        ws = stride * (ow - 1) + 1
        for i in range(n):
            gi = gb[i].reshape(f, -1)
            if d_w is not None:
                d_w += gi @ _windows(np.pad(xb[i], pad), kh, kw, stride, oh, ow).T
            if d_x is not None:
                dcols = (wmat.T @ gi).reshape(c, kh, kw, oh, ow)
                dxp = np.zeros((c, hp, wp))
                for a in range(kh):
                    for b in range(kw):
                        dxp[:, a : a + hs : stride, b : b + ws : stride] += dcols[:, a, b]
                d_x[i] = dxp[:, padding : padding + h, padding : padding + w]
        d_bias = gb.sum(axis=(0, 2, 3)) if bias.requires_grad else None
        if d_x is not None and not batched:
            d_x = d_x[0]
        return d_x, (d_w.reshape(kernels.shape) if d_w is not None else None), d_bias

    return Tensor._from_op(out if batched else out[0], (x, kernels, bias), backward)


def maxpool2d(x: Tensor, window: int = 2, stride: int = 2) -> Tensor:
    """Non-overlapping max pooling with floor semantics on odd extents.

    Gradient flows to the first maximal element of each window in
    row-major order.
    """
    x = as_tensor(x)
    if window != stride:
        raise ConfigError("only non-overlapping pooling (window == stride) is supported")
    if x.ndim not in (3, 4):
        raise ShapeError(f"maxpool2d input must be rank 3 or 4, got {x.shape}")
    h, w = x.shape[-2:]
    if h < window or w < window:
        raise ShapeError(f"spatial extent {h}x{w} smaller than pooling window {window}")
    oh, ow = h // window, w // window
    lead = x.shape[:-2]
    cropped = x.data[..., : oh * window, : ow * window]
    blocks = cropped.reshape(*lead, oh, window, ow, window)
    blocks = np.moveaxis(blocks, -3, -2).reshape(*lead, oh, ow, window * window)
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(g):
        mask = np.zeros(blocks.shape)
        np.put_along_axis(mask, idx[..., None], g[..., None], axis=-1)
        mask = mask.reshape(*lead, oh, ow, window, window)
        mask = np.moveaxis(mask, -2, -3).reshape(*lead, oh * window, ow * window)
        full = np.zeros(x.shape)
        full[..., : oh * window, : ow * window] = mask
        return (full,)

    return Tensor._from_op(out, (x,), backward)


# ---------------------------------------------------------------------------
# dense layers and activations
# ---------------------------------------------------------------------------

def linear(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """``weights @ x + bias`` for a vector, or row-wise for a ``B x n`` batch."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if weights.ndim != 2:
        raise ShapeError(f"weights must be rank-2, got {weights.shape}")
    m, n = weights.shape
    if x.ndim not in (1, 2) or x.shape[-1] != n:
        raise ShapeError(f"linear: input {x.shape} does not match weights {weights.shape}")
    if bias.shape != (m,):
        raise ShapeError(f"linear: bias {bias.shape} does not match {m} outputs")
    xd, wd = x.data, weights.data
    out = xd @ wd.T + bias.data

    def backward(g):
        d_x = g @ wd
        if xd.ndim == 1:
            d_w = np.outer(g, xd)
            d_b = g
        else:
            d_w = g.T @ xd
            d_b = g.sum(axis=0)
        return d_x, d_w, d_b

    return Tensor._from_op(out, (x, weights, bias), backward)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def flatten(x: Tensor, batched: bool = False) -> Tensor:
    """Flatten to a vector, or to ``B x -1`` when ``batched``."""
    return x.reshape(x.shape[0], -1) if batched else x.reshape(-1)


def concat(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    parts = [as_tensor(p) for p in parts]
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise ShapeError("concat: leading dimensions differ")
    sizes = [p.shape[-1] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(g[..., bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return Tensor._from_op(np.concatenate([p.data for p in parts], axis=-1), parts, backward)


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NumericError("softmax received non-finite scores")
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(scores: Tensor) -> Tensor:
    scores = as_tensor(scores)
    if scores.ndim not in (1, 2):
        raise ShapeError("softmax expects a score vector or a B x L batch")
    p = _stable_softmax(scores.data)

    def backward(g):
        return (p * (g - (g * p).sum(axis=-1, keepdims=True)),)

    return Tensor._from_op(p, (scores,), backward)


def _check_labels(labels, n_rows: int | None, n_classes: int) -> np.ndarray:
    lab = np.asarray(labels)
    if not np.issubdtype(lab.dtype, np.integer):
        raise ConfigError("class indices must be integers")
    if n_rows is None:
        if lab.ndim != 0:
            raise ConfigError("a single score vector takes a single class index")
    elif lab.shape != (n_rows,):
        raise ConfigError(f"expected {n_rows} class indices, got shape {lab.shape}")
    if np.any(lab < 0) or np.any(lab >= n_classes):
        raise ConfigError(f"class index out of range [0, {n_classes})")
    return lab


def cross_entropy(probs: Tensor, true_class) -> Tensor:
    """``-log p[true_class]`` with ``p`` clamped to at least ``PROB_FLOOR``.

    For a ``B x L`` batch, ``true_class`` is a length-``B`` index array and
    the result is the batch mean.
    """
    probs = as_tensor(probs)
    if probs.ndim not in (1, 2):
        raise ShapeError("cross_entropy expects a probability vector or a B x L batch")
    batched = probs.ndim == 2
    lab = _check_labels(true_class, probs.shape[0] if batched else None, probs.shape[-1])
    rows = np.arange(probs.shape[0]) if batched else None
    picked = probs.data[rows, lab] if batched else probs.data[lab]
    clamped = np.maximum(picked, PROB_FLOOR)
    losses = -np.log(clamped)
    scale = 1.0 / probs.shape[0] if batched else 1.0

    def backward(g):
        d = np.zeros(probs.shape)
        local = np.where(picked >= PROB_FLOOR, -1.0 / clamped, 0.0) * g * scale
        if batched:
            d[rows, lab] = local
        else:
            d[lab] = local
        return (d,)

    return Tensor._from_op(np.asarray(losses.mean() if batched else losses), (probs,), backward)


def softmax_cross_entropy(scores: Tensor, labels) -> Tensor:
    """Fused softmax followed by cross-entropy; gradient on scores is ``p - onehot``.

    Batched scores give the mean loss over rows.
    """
    scores = as_tensor(scores)
    if scores.ndim not in (1, 2):
        raise ShapeError("softmax_cross_entropy expects a score vector or a B x L batch")
    batched = scores.ndim == 2
    lab = _check_labels(labels, scores.shape[0] if batched else None, scores.shape[-1])
    p = _stable_softmax(scores.data)
    rows = np.arange(scores.shape[0]) if batched else None
    losses = -np.log(np.maximum(p[rows, lab] if batched else p[lab], PROB_FLOOR))
    scale = 1.0 / scores.shape[0] if batched else 1.0

    def backward(g):
        d = p.copy()
        if batched:
            d[rows, lab] -= 1.0
        else:
            d[lab] -= 1.0
        return (d * (g * scale),)

    return Tensor._from_op(np.asarray(losses.mean() if batched else losses), (scores,), backward)
