"""Network blocks: stacked Conv1D extractor, highway gate, MLP.

All blocks take batched inputs (``[B, n, L]`` windows, ``[B, n]`` vectors) and
own their parameters in an ordered ``params`` dict keyed by dotted names. Each
parameter is drawn from its own generator seeded by ``(seed, name)``, so adding
a block never shifts the draws of another.
"""

import math
import zlib

import numpy as np

from . import tensor as T
from .errors import ConfigError, DimensionError
from .tensor import Tensor

KERNEL_SIZE = 3


def sub_rng(seed, name):
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def _uniform(seed, name, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    data = sub_rng(seed, name).uniform(-bound, bound, size=shape)
    return Tensor(data, requires_grad=True, name=name)


def _zeros(name, shape):
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


class Block:
    params: dict

    def parameters(self):
        return list(self.params.values())

    def num_parameters(self):
        return int(np.sum([p.size for p in self.params.values()]))


class CnnStack(Block):
    """``depth`` conv(k=3)+relu layers over time, flattened, then linear to ``n_out``."""

    def __init__(self, n_in, length, n_out, depth=2, channels=32, seed=0, prefix="cnn"):
        if depth < 1 or channels < 1:
            raise ConfigError(f"{prefix}: depth and channels must be >= 1")
        self.out_length = length - depth * (KERNEL_SIZE - 1)
        if self.out_length < 1:
            raise ConfigError(
                f"{prefix}: window length {length} too short for {depth} conv layers of kernel {KERNEL_SIZE}"
            )
        self.n_in, self.length, self.n_out = n_in, length, n_out
        self.depth, self.channels = depth, channels
        self.params = {}
        c_prev = n_in
        for i in range(depth):
            w = f"{prefix}.conv{i}.weight"
            b = f"{prefix}.conv{i}.bias"
            self.params[w] = _uniform(seed, w, (channels, c_prev, KERNEL_SIZE), c_prev * KERNEL_SIZE)
            self.params[b] = _zeros(b, (channels,))
            c_prev = channels
        flat = channels * self.out_length
        self.params[f"{prefix}.head.weight"] = _uniform(seed, f"{prefix}.head.weight", (flat, n_out), flat)
        self.params[f"{prefix}.head.bias"] = _zeros(f"{prefix}.head.bias", (n_out,))
        self._prefix = prefix

    def __call__(self, window):
        if window.ndim != 3 or window.shape[1:] != (self.n_in, self.length):
            raise DimensionError(f"{self._prefix}: expected [B, {self.n_in}, {self.length}], got {window.shape}")
        p = self.params
        h = window
        for i in range(self.depth):
            h = T.relu(T.conv1d(h, p[f"{self._prefix}.conv{i}.weight"], p[f"{self._prefix}.conv{i}.bias"]))
        flat = T.reshape(h, (window.shape[0], self.channels * self.out_length))
        return T.linear(flat, p[f"{self._prefix}.head.weight"], p[f"{self._prefix}.head.bias"])


class HighwayHead(Block):
    """Gated mix ``transform * g + carry * (1 - g)``.

    The gate ``g = sigmoid(W_T vec(window) + b_T)`` yields one value per
    variable. The carry path is a linear autoregression over each variable's
    last ``hw`` values, with weights shared across variables.
    """

    def __init__(self, n, length, hw, seed=0, prefix="highway"):
        if not 1 <= hw <= length:
            raise ConfigError(f"{prefix}: highway window hw={hw} must lie in [1, {length}]")
        self.n, self.length, self.hw = n, length, hw
        self._prefix = prefix
        gw, gb = f"{prefix}.gate.weight", f"{prefix}.gate.bias"
        cw, cb = f"{prefix}.carry.weight", f"{prefix}.carry.bias"
        self.params = {
            gw: _uniform(seed, gw, (n * length, n), n * length),
            gb: _zeros(gb, (n,)),
            cw: _uniform(seed, cw, (hw, 1), hw),
            cb: _zeros(cb, (1,)),
        }

    def gate(self, window):
        p = self.params
        batch = window.shape[0]
        flat = T.reshape(window, (batch, self.n * self.length))
        return T.sigmoid(T.linear(flat, p[f"{self._prefix}.gate.weight"], p[f"{self._prefix}.gate.bias"]))

    def carry(self, window):
        p = self.params
        batch = window.shape[0]
        recent = T.reshape(window[:, :, self.length - self.hw:], (batch * self.n, self.hw))
        ar = T.linear(recent, p[f"{self._prefix}.carry.weight"], p[f"{self._prefix}.carry.bias"])
        return T.reshape(ar, (batch, self.n))

    def __call__(self, transform_out, window):
        if window.ndim != 3 or window.shape[1:] != (self.n, self.length):
            raise DimensionError(f"{self._prefix}: expected [B, {self.n}, {self.length}], got {window.shape}")
        if transform_out.shape != (window.shape[0], self.n):
            raise DimensionError(f"{self._prefix}: transform output {transform_out.shape} mismatched")
        g = self.gate(window)
        return transform_out * g + self.carry(window) * (1.0 - g)


class HighwayCnn(Block):
    def __init__(self, n, length, hw, depth=2, channels=32, seed=0, prefix="hcnn"):
        self.cnn = CnnStack(n, length, n, depth=depth, channels=channels, seed=seed, prefix=f"{prefix}.cnn")
        self.highway = HighwayHead(n, length, hw, seed=seed, prefix=f"{prefix}.highway")
        self.params = {**self.cnn.params, **self.highway.params}

    def __call__(self, window):
        return self.highway(self.cnn(window), window)


class Mlp(Block):
    def __init__(self, n, hidden=64, seed=0, prefix="mlp"):
        if hidden < 1:
            raise ConfigError(f"{prefix}: hidden size must be >= 1")
        self.n, self.hidden = n, hidden
        self._prefix = prefix
        names = [f"{prefix}.fc{i}.{kind}" for i in (0, 1) for kind in ("weight", "bias")]
        self.params = {
            names[0]: _uniform(seed, names[0], (n, hidden), n),
            names[1]: _zeros(names[1], (hidden,)),
            names[2]: _uniform(seed, names[2], (hidden, n), hidden),
            names[3]: _zeros(names[3], (n,)),
        }
        self._names = names

    def __call__(self, x):
        if x.ndim != 2 or x.shape[1] != self.n:
            raise DimensionError(f"{self._prefix}: expected [B, {self.n}], got {x.shape}")
        w0, b0, w1, b1 = (self.params[k] for k in self._names)
        return T.linear(T.relu(T.linear(x, w0, b0)), w1, b1)


def cnn_param_count(n, length, depth, channels):
    """``sum_i (c_{i-1} * C * 3 + C) + C * (L - 2 * depth) * n + n`` with ``c_0 = n``."""
    convs = (n * channels * KERNEL_SIZE + channels) + (depth - 1) * (channels * channels * KERNEL_SIZE + channels)
    return convs + channels * (length - depth * (KERNEL_SIZE - 1)) * n + n


def highway_param_count(n, length, hw):
    """Gate ``n * L * n + n`` plus shared carry ``hw + 1``."""
    return n * length * n + n + hw + 1


def mlp_param_count(n, hidden):
    return 2 * n * hidden + hidden + n
