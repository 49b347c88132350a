"""Dense float64 tensors with a define-by-run reverse-mode gradient tape.

Every op that has at least one ``requires_grad`` input records its inputs and a
backward rule on the output tensor, stamped with a monotonically increasing
sequence number. ``backward`` replays the rules of every node reachable from
the root in reverse sequence order, which is a valid reverse topological order
because a node is always recorded after all of its inputs.

Only the operations the forecasting models need are provided. Binary ops
require identical shapes; the one exception is a scalar operand (a Python
number or a 0-d tensor). ``bias_add`` is the single explicit row-vector
combination.
"""

import itertools
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import ContractError, DimensionError, NonFiniteError

_seq = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable recording inside the block (inference only)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"tensor {name or ''} constructed with non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._seq = next(_seq)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def _result(data, parents, backward_fn, op):
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._seq = next(_seq)
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(g, like):
    # Gradient for a scalar operand combined with a larger tensor.
    return g if g.shape == like.shape else np.asarray(g.sum()).reshape(like.shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and not (a.ndim == 0 or b.ndim == 0):
        _check_same(a, b, "add")

    def bw(g):
        return _reduce_to(g, a), _reduce_to(g, b)

    return _result(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and not (a.ndim == 0 or b.ndim == 0):
        _check_same(a, b, "sub")

    def bw(g):
        return _reduce_to(g, a), _reduce_to(-g, b)

    return _result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and not (a.ndim == 0 or b.ndim == 0):
        _check_same(a, b, "mul")

    def bw(g):
        return _reduce_to(g * b.data, a), _reduce_to(g * a.data, b)

    return _result(a.data * b.data, (a, b), bw, "mul")


def neg(a):
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def sigmoid(a):
    s = expit(a.data)
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def relu(a):
    mask = a.data > 0.0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def sum(a):
    shape = a.shape
    return _result(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, g),), "sum")


def reshape(a, shape):
    old = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {old} as {shape}") from exc
    return _result(data, (a,), lambda g: (g.reshape(old),), "reshape")


def getitem(a, index):
    data = np.array(a.data[index])

    def bw(g):
        full = np.zeros_like(a.data)
        full[index] += g
        return (full,)

    return _result(data, (a,), bw, "getitem")


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        da = g @ b.data.T if a.requires_grad else None
        db = a.data.T @ g if b.requires_grad else None
        return da, db

    return _result(a.data @ b.data, (a, b), bw, "matmul")


def bias_add(x, bias):
    """Add a length-p vector to every row of an ``[..., p]`` tensor."""
    if bias.ndim != 1 or x.shape[-1:] != bias.shape:
        raise DimensionError(f"bias_add: bias {bias.shape} does not match trailing axis of {x.shape}")
    lead = tuple(range(x.ndim - 1))

    def bw(g):
        return g, g.sum(axis=lead)

    return _result(x.data + bias.data, (x, bias), bw, "bias_add")


def linear(x, weight, bias=None):
    out = matmul(x, weight)
    return out if bias is None else bias_add(out, bias)


def conv1d(x, kernels, bias):
    """Valid (unpadded, stride 1) cross-correlation along the last axis.

    ``x`` is ``[c_in, L]`` or batched ``[B, c_in, L]``; ``kernels`` is
    ``[c_out, c_in, k]``; the result is ``[(B,) c_out, L - k + 1]``.
    """
    if kernels.ndim != 3 or bias.shape != (kernels.shape[0],):
        raise DimensionError(f"conv1d: bad kernel/bias shapes {kernels.shape}, {bias.shape}")
    batched = x.ndim == 3
    if x.ndim not in (2, 3) or x.shape[-2] != kernels.shape[1]:
        raise DimensionError(f"conv1d: input {x.shape} incompatible with kernels {kernels.shape}")
    c_out, c_in, k = kernels.shape
    length = x.shape[-1]
    if length < k:
        raise ContractError(f"conv1d: window too short, L={length} < k={k}")
    xb = x.data if batched else x.data[None]
    batch = xb.shape[0]
    l_out = length - k + 1
    # im2col: one row per (sample, output position), columns ordered (c_in, k).
    cols = sliding_window_view(xb, k, axis=2).transpose(0, 2, 1, 3).reshape(batch * l_out, c_in * k)
    w_mat = kernels.data.reshape(c_out, c_in * k)
    out = (cols @ w_mat.T).reshape(batch, l_out, c_out).transpose(0, 2, 1) + bias.data[None, :, None]

    def bw(g):
        gb = g if batched else g[None]
        g_cols = gb.transpose(0, 2, 1).reshape(batch * l_out, c_out)
        d_bias = g_cols.sum(axis=0)
        d_kernels = (g_cols.T @ cols).reshape(c_out, c_in, k)
        if not x.requires_grad:
            return None, d_kernels, d_bias
        d_patch = (g_cols @ w_mat).reshape(batch, l_out, c_in, k)
        d_x = np.zeros_like(xb)
        for j in range(k):
            d_x[:, :, j:j + l_out] += d_patch[:, :, :, j].transpose(0, 2, 1)
        return (d_x if batched else d_x[0]), d_kernels, d_bias

    out = np.ascontiguousarray(out if batched else out[0])
    return _result(out, (x, kernels, bias), bw, "conv1d")


def l1_loss(pred, target):
    """Mean absolute error over all elements; sign(0) is taken as 0."""
    pred, target = _as_tensor(pred), _as_tensor(target)
    _check_same(pred, target, "l1_loss")
    diff = pred.data - target.data
    count = diff.size

    def bw(g):
        s = np.sign(diff) * (g / count)
        return s, -s

    return _result(np.asarray(np.abs(diff).mean()), (pred, target), bw, "l1_loss")


def backward(root):
    """Accumulate d(root)/d(node) into ``.grad`` of every reachable tracked node."""
    if root.size != 1:
        raise ContractError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        raise ContractError("backward: root is not on the tape (no input requires grad)")

    nodes = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in nodes:
            continue
        nodes[id(node)] = node
        stack.extend(p for p in node._parents if p.requires_grad)

    pending = {id(root): np.ones_like(root.data)}
    for node in sorted(nodes.values(), key=lambda t: t._seq, reverse=True):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg
