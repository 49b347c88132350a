"""PFNet: parallel trend / fluctuation forecaster and its ablation variants.

* LTPM: highway-CNN over the raw window, predicting ``x[t+h-1]``.
* SFPM: highway-CNN over the differenced window plus an MLP over ``x[t]``,
  predicting ``x[t+h] - x[t+h-1]``.
* IFM: the sum of the two.

``ltpm_only`` keeps just the LTPM network and trains it on ``x[t+h]``
directly; ``pfnet_xt`` drops the MLP branch from SFPM.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .data import WindowedSample
from .errors import ConfigError, DimensionError
from .layers import HighwayCnn, Mlp, cnn_param_count, highway_param_count, mlp_param_count
from .tensor import Tensor

NEURAL_KINDS = ("pfnet", "ltpm_only", "pfnet_xt")


@dataclass(frozen=True)
class LossWeights:
    c1: float = 1.0
    c2: float = 1.0

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError(f"loss weights must be nonnegative, got c1={self.c1}, c2={self.c2}")


@dataclass(frozen=True)
class PFNetConfig:
    n: int
    window: int
    horizon: int
    kind: str = "pfnet"
    depth: int = 2
    channels: int = 32
    hw: int = 8
    mlp_hidden: int = 64
    c1: float = 1.0
    c2: float = 1.0
    seed: int = 0

    def validate(self):
        if self.kind not in NEURAL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {NEURAL_KINDS}")
        if self.n < 1 or self.horizon < 1:
            raise ConfigError("n and horizon must be >= 1")
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        LossWeights(self.c1, self.c2)

    @property
    def weights(self):
        return LossWeights(self.c1, self.c2)

    def to_dict(self):
        return asdict(self)


def ifm_fuse(trend, fluct):
    if trend.shape != fluct.shape:
        raise DimensionError(f"ifm_fuse: trend {trend.shape} and fluctuation {fluct.shape} differ")
    return T.add(trend, fluct)


def triple_loss(preds, targets, weights=LossWeights()):
    """``L1(final) + c1 * L1(trend) + c2 * L1(fluct)``; each term is a mean over batch and variables."""
    final, trend, fluct = preds
    t_final, t_trend, t_fluct = targets
    loss = T.l1_loss(final, t_final)
    if weights.c1:
        loss = loss + weights.c1 * T.l1_loss(trend, t_trend)
    if weights.c2:
        loss = loss + weights.c2 * T.l1_loss(fluct, t_fluct)
    return loss


def _batched(x, ndim):
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim == ndim - 1:
        return T.reshape(x, (1,) + x.shape), True
    return x, False


def _unbatch(x, squeeze):
    return T.reshape(x, x.shape[1:]) if squeeze else x


class PFNetModel:
    def __init__(self, config):
        config.validate()
        self.config = config
        c = config
        self.ltpm = HighwayCnn(c.n, c.window, c.hw, c.depth, c.channels, seed=c.seed, prefix="ltpm")
        self.sfpm_cnn = None
        self.sfpm_mlp = None
        if c.kind != "ltpm_only":
            self.sfpm_cnn = HighwayCnn(c.n, c.window - 1, c.hw, c.depth, c.channels, seed=c.seed, prefix="sfpm.hcnn")
        if c.kind == "pfnet":
            self.sfpm_mlp = Mlp(c.n, c.mlp_hidden, seed=c.seed, prefix="sfpm.mlp")
        self.params = {}
        for block in (self.ltpm, self.sfpm_cnn, self.sfpm_mlp):
            if block is not None:
                self.params.update(block.params)

    @property
    def kind(self):
        return self.config.kind

    def num_parameters(self):
        return int(sum(p.size for p in self.params.values()))

    def ltpm_forward(self, raw_window):
        x, squeeze = _batched(raw_window, 3)
        return _unbatch(self.ltpm(x), squeeze)

    def sfpm_forward(self, diff_window, last_obs):
        if self.sfpm_cnn is None:
            raise ConfigError("ltpm_only model has no fluctuation module")
        d, squeeze = _batched(diff_window, 3)
        out = self.sfpm_cnn(d)
        if self.sfpm_mlp is not None:
            x, _ = _batched(last_obs, 2)
            out = out + self.sfpm_mlp(x)
        return _unbatch(out, squeeze)

    def forward(self, raw_window, diff_window=None, last_obs=None):
        """Return ``(final, trend, fluct)``; trend and fluct are None for ``ltpm_only``."""
        trend = self.ltpm_forward(raw_window)
        if self.kind == "ltpm_only":
            return trend, None, None
        fluct = self.sfpm_forward(diff_window, last_obs)
        return ifm_fuse(trend, fluct), trend, fluct

    def loss(self, batch):
        final, trend, fluct = self.forward(batch.raw, batch.diff, batch.last)
        if self.kind == "ltpm_only":
            return T.l1_loss(final, Tensor(batch.final))
        targets = (Tensor(batch.final), Tensor(batch.trend), Tensor(batch.fluct))
        return triple_loss((final, trend, fluct), targets, self.config.weights)

    def predict(self, samples, batch_size=1024):
        """Final forecasts ``[M, n]`` for a SampleSet, without recording a tape."""
        out = []
        with T.no_grad():
            for b in samples.batches(batch_size):
                out.append(self.forward(b.raw, b.diff, b.last)[0].data)
        return np.concatenate(out, axis=0)

    def state(self):
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state(self, state):
        if set(state) != set(self.params):
            missing = set(self.params) ^ set(state)
            raise ConfigError(f"parameter sets differ: {sorted(missing)}")
        for k, p in self.params.items():
            if state[k].shape != p.shape:
                raise ConfigError(f"parameter {k}: shape {state[k].shape} != {p.shape}")
            p.data = np.array(state[k], dtype=np.float64)


def variant_forward(kind, model, sample):
    """Final prediction of ``model`` run as ``kind`` on a WindowedSample or SampleSet."""
    if kind != model.kind:
        raise ConfigError(f"variant {kind!r} does not match model built as {model.kind!r}")
    if isinstance(sample, WindowedSample):
        inputs = (sample.raw_window, sample.diff_window, sample.last_obs)
    else:
        inputs = (sample.raw, sample.diff, sample.last)
    return model.forward(*inputs)[0]


def param_count(config):
    """Closed-form parameter count for a config (matches ``PFNetModel.num_parameters``)."""
    c = config
    total = cnn_param_count(c.n, c.window, c.depth, c.channels) + highway_param_count(c.n, c.window, c.hw)
    if c.kind != "ltpm_only":
        total += cnn_param_count(c.n, c.window - 1, c.depth, c.channels)
        total += highway_param_count(c.n, c.window - 1, c.hw)
    if c.kind == "pfnet":
        total += mlp_param_count(c.n, c.mlp_hidden)
    return total
