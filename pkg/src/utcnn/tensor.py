"""Dense fp64 tensors with reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient onto the parents.  :func:`backward`
walks that graph in reverse topological order.  Trainable leaves are
:class:`Parameter` objects, whose ``grad`` buffer persists across passes
until :meth:`Parameter.zero_grad` is called.

Vectors are 1-D arrays and matrices are 2-D arrays; nothing broadcasts.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    BackwardStateError,
    DimensionError,
    EmptyPoolError,
    NumericError,
)

__all__ = [
    "Tensor",
    "Parameter",
    "as_tensor",
    "matvec",
    "rowwise_matvec",
    "concat",
    "hstack",
    "affine",
    "affine_tanh",
    "tanh",
    "add",
    "unfold",
    "max_rows",
    "elem_max",
    "elem_avg",
    "softmax",
    "softmax_xent",
    "backward",
    "gradcheck",
]


class Tensor:
    """An immutable fp64 value, optionally part of a differentiable graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise DimensionError(f"tensors are vectors or matrices, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_vector(self):
        return self.data.ndim == 1

    def item(self):
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data.copy()

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self):
        kind = "Parameter" if isinstance(self, Parameter) else "Tensor"
        return f"{kind}(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A trainable leaf (a gradient slot).

    ``grad`` always has the value's shape and starts at zero; ``accumulated``
    records whether any backward pass has written into it since the last
    reset.
    """

    __slots__ = ("accumulated",)

    def __init__(self, data):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.accumulated = False

    def _accumulate(self, g):
        self.grad += g
        self.accumulated = True

    def zero_grad(self):
        self.grad.fill(0.0)
        self.accumulated = False


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward_fn):
    """Wrap ``data``; keep the graph edge only if a parent needs gradients."""
    live = tuple(p for p in parents if p.requires_grad)
    if not live:
        return Tensor(data)
    return Tensor(data, requires_grad=True, _parents=live, _backward=backward_fn)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matvec(M, v) -> Tensor:
    """Matrix-vector product ``M @ v``."""
    M, v = as_tensor(M), as_tensor(v)
    if M.data.ndim != 2 or v.data.ndim != 1 or M.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec: cannot multiply {M.shape} by {v.shape}")

    def _backward(g):
        if M.requires_grad:
            M._accumulate(np.outer(g, v.data))
        if v.requires_grad:
            v._accumulate(M.data.T @ g)

    return _result(M.data @ v.data, (M, v), _backward)


def rowwise_matvec(X, M) -> Tensor:
    """Apply ``M`` to every row of ``X``: row ``i`` of the result is ``M @ X[i]``."""
    X, M = as_tensor(X), as_tensor(M)
    if X.data.ndim != 2 or M.data.ndim != 2 or X.shape[1] != M.shape[1]:
        raise DimensionError(f"rowwise_matvec: rows of {X.shape} do not fit {M.shape}")

    def _backward(g):
        if X.requires_grad:
            X._accumulate(g @ M.data)
        if M.requires_grad:
            M._accumulate(g.T @ X.data)

    return _result(X.data @ M.data.T, (X, M), _backward)


def concat(*vectors) -> Tensor:
    """Concatenate vectors end to end."""
    ts = [as_tensor(v) for v in vectors]
    for t in ts:
        if t.data.ndim != 1:
            raise DimensionError(f"concat expects vectors, got shape {t.shape}")
    sizes = [t.shape[0] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def _backward(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t._accumulate(g[lo:hi])

    data = np.concatenate([t.data for t in ts]) if ts else np.zeros(0)
    return _result(data, ts, _backward)


def hstack(*matrices) -> Tensor:
    """Join matrices with equal row counts side by side."""
    ts = [as_tensor(m) for m in matrices]
    if not ts:
        raise EmptyPoolError("hstack needs at least one matrix")
    rows = ts[0].shape[0]
    for t in ts:
        if t.data.ndim != 2 or t.shape[0] != rows:
            raise DimensionError(f"hstack: shapes {[t.shape for t in ts]} do not align")
    bounds = np.cumsum([0] + [t.shape[1] for t in ts])

    def _backward(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                t._accumulate(g[:, lo:hi])

    return _result(np.hstack([t.data for t in ts]), ts, _backward)


def _affine_data(W, x, b, op):
    if W.data.ndim != 2 or b.data.ndim != 1 or W.shape[0] != b.shape[0]:
        raise DimensionError(f"{op}: weight {W.shape} and bias {b.shape} do not conform")
    if x.data.ndim == 1:
        if x.shape[0] != W.shape[1]:
            raise DimensionError(f"{op}: weight {W.shape} cannot take input {x.shape}")
        return W.data @ x.data + b.data
    if x.data.ndim == 2 and x.shape[1] == W.shape[1]:
        return x.data @ W.data.T + b.data
    raise DimensionError(f"{op}: weight {W.shape} cannot take input {x.shape}")


def _affine_backward(W, x, b, gz):
    if x.data.ndim == 1:
        if W.requires_grad:
            W._accumulate(np.outer(gz, x.data))
        if x.requires_grad:
            x._accumulate(W.data.T @ gz)
        if b.requires_grad:
            b._accumulate(gz)
    else:
        if W.requires_grad:
            W._accumulate(gz.T @ x.data)
        if x.requires_grad:
            x._accumulate(gz @ W.data)
        if b.requires_grad:
            b._accumulate(gz.sum(axis=0))


def affine(W, x, b) -> Tensor:
    """``W @ x + b``; a matrix ``x`` is treated as a stack of row inputs."""
    W, x, b = as_tensor(W), as_tensor(x), as_tensor(b)
    z = _affine_data(W, x, b, "affine")
    return _result(z, (W, x, b), lambda g: _affine_backward(W, x, b, g))


def affine_tanh(W, x, b) -> Tensor:
    """``tanh(W @ x + b)``; a matrix ``x`` is treated as a stack of row inputs."""
    W, x, b = as_tensor(W), as_tensor(x), as_tensor(b)
    y = np.tanh(_affine_data(W, x, b, "affine_tanh"))

    def _backward(g):
        _affine_backward(W, x, b, g * (1.0 - y * y))

    return _result(y, (W, x, b), _backward)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: x._accumulate(g * (1.0 - y * y)))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")

    def _backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _result(a.data + b.data, (a, b), _backward)


# ---------------------------------------------------------------------------
# windows and pooling
# ---------------------------------------------------------------------------


def unfold(X, width) -> Tensor:
    """Concatenate each run of ``width`` consecutive rows of ``X``.

    Row ``m`` of the result is ``[X[m]; X[m+1]; ...; X[m+width-1]]``.  An
    input with fewer than ``width`` rows is zero-padded at the bottom, so
    at least one window always exists.
    """
    X = as_tensor(X)
    if X.data.ndim != 2:
        raise DimensionError(f"unfold expects a matrix, got shape {X.shape}")
    if width < 1:
        raise DimensionError(f"window width must be positive, got {width}")
    n, k = X.shape
    padded = X.data
    if n < width:
        padded = np.vstack([padded, np.zeros((width - n, k))])
    windows = sliding_window_view(padded, (width, k))[:, 0].reshape(-1, width * k)
    n_pos = windows.shape[0]

    def _backward(g):
        gx = np.zeros((max(n, width), k))
        for j in range(width):
            gx[j : j + n_pos] += g[:, j * k : (j + 1) * k]
        X._accumulate(gx[:n])

    return _result(np.ascontiguousarray(windows), (X,), _backward)


def max_rows(X) -> Tensor:
    """Column-wise maximum over the rows of ``X`` (max-pooling over positions)."""
    X = as_tensor(X)
    if X.data.ndim != 2:
        raise DimensionError(f"max_rows expects a matrix, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyPoolError("max_rows over zero rows")
    idx = np.argmax(X.data, axis=0)
    cols = np.arange(X.shape[1])

    def _backward(g):
        gx = np.zeros_like(X.data)
        gx[idx, cols] = g
        X._accumulate(gx)

    return _result(X.data[idx, cols] + 0.0, (X,), _backward)


def _stack(tensors, op):
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise EmptyPoolError(f"{op} over an empty list")
    shape = ts[0].shape
    for t in ts[1:]:
        if t.shape != shape:
            raise DimensionError(f"{op}: shapes {shape} and {t.shape} differ")
    return ts, np.stack([t.data for t in ts])


def elem_max(tensors: Sequence) -> Tensor:
    """Elementwise maximum over same-shaped tensors.

    Ties send the gradient to the first maximal input.
    """
    ts, stacked = _stack(tensors, "elem_max")
    if len(ts) == 1:
        return ts[0]
    idx = np.argmax(stacked, axis=0)

    def _backward(g):
        for i, t in enumerate(ts):
            if t.requires_grad:
                t._accumulate(np.where(idx == i, g, 0.0))

    # adding zero maps -0.0 to +0.0, keeping the result independent of input order
    return _result(stacked.max(axis=0) + 0.0, ts, _backward)


def elem_avg(tensors: Sequence) -> Tensor:
    """Elementwise mean over same-shaped tensors.

    Values are sorted per position before summation, so the result is
    bitwise independent of input order.
    """
    ts, stacked = _stack(tensors, "elem_avg")
    m = len(ts)
    total = np.zeros(stacked.shape[1:])
    for row in np.sort(stacked, axis=0):
        total += row

    def _backward(g):
        for t in ts:
            if t.requires_grad:
                t._accumulate(g / m)

    return _result(total / m, ts, _backward)


# ---------------------------------------------------------------------------
# output layer
# ---------------------------------------------------------------------------


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_xent(logits, label: int):
    """Softmax probabilities and cross-entropy loss for one example.

    Returns ``(probs, loss)`` where ``probs`` is a plain array and ``loss``
    a scalar :class:`Tensor`.  The max logit is subtracted before
    exponentiation and the loss uses log-sum-exp, so neither overflows.
    """
    logits = as_tensor(logits)
    if logits.data.ndim != 1:
        raise DimensionError(f"softmax_xent expects a logit vector, got {logits.shape}")
    if not np.all(np.isfinite(logits.data)):
        raise NumericError("softmax_xent received non-finite logits")
    C = logits.shape[0]
    if not 0 <= label < C:
        raise IndexError(f"label {label} out of range for {C} classes")
    shifted = logits.data - logits.data.max()
    e = np.exp(shifted)
    total = e.sum()
    probs = e / total
    loss = np.log(total) - shifted[label]

    def _backward(g):
        d = probs.copy()
        d[label] -= 1.0
        logits._accumulate(g * d)

    return probs, _result(np.array(loss), (logits,), _backward)


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------


def _topological(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> list[Parameter]:
    """Accumulate ``d loss / d p`` into every reachable :class:`Parameter`.

    Returns the parameters that were reached.  A graph can be walked only
    once; building a fresh forward pass is required for another call.
    """
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise BackwardStateError("backward already ran on this graph; rerun the forward pass")
    loss._consumed = True
    if not loss.requires_grad:
        return []
    order = _topological(loss)
    loss.grad = np.ones_like(loss.data)
    reached = []
    for node in reversed(order):
        if isinstance(node, Parameter):
            reached.append(node)
            continue
        if node.grad is not None and node._backward is not None:
            node._backward(node.grad)
        # intermediates are single-use; drop references so memory is freed
        node.grad = None
        node._parents = ()
        node._backward = None
    return reached


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Worst relative error between backward gradients and central differences.

    ``loss_fn`` must rebuild the forward graph from the current parameter
    values each time it is called.  For each parameter, up to
    ``max_entries`` entries (all by default) are compared using
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = list(params)
    if not params:
        return 0.0
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.item()):
        raise NumericError("loss is not finite")
    backward(loss)
    analytic = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        entries = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = rng.choice(flat.size, size=max_entries, replace=False)
        for i in entries:
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("loss is not finite under perturbation")
            numeric = (up - down) / (2.0 * eps)
            ana = a.reshape(-1)[i]
            err = abs(ana - numeric) / max(abs(ana), abs(numeric), floor)
            worst = max(worst, err)
    for p in params:
        p.zero_grad()
    return worst
