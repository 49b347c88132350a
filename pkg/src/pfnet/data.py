"""CSV ingestion, max-abs normalization, differencing, and sliding-window samples.

Series are stored variables-by-time (``n x T``). A sample anchored at time
``t`` sees the window ``x[t-P+1 .. t]`` and is supervised on ``x[t+h-1]``
(trend), ``x[t+h] - x[t+h-1]`` (fluctuation) and their sum (final).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DataError, EmptySplitError, ParseError

log = logging.getLogger(__name__)


@dataclass
class SeriesMatrix:
    values: np.ndarray
    scale: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"series must be 2-D (n x T), got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise DataError("series contains non-finite values")
        if self.scale is None:
            self.scale = np.ones(self.n)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.scale.shape != (self.n,) or not (self.scale > 0).all():
            raise DataError("scale must be a strictly positive length-n vector")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    def denormalize(self, values=None):
        values = self.values if values is None else np.asarray(values)
        return values * self.scale.reshape((-1,) + (1,) * (values.ndim - 1))


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.6
    valid: float = 0.2
    test: float = 0.2

    def __post_init__(self):
        fr = (self.train, self.valid, self.test)
        if min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ContractError(f"split fractions must be positive and sum to 1, got {fr}")

    def boundaries(self, T):
        """Exclusive end indices of the train and validation regions."""
        return int(self.train * T), int((self.train + self.valid) * T)


@dataclass(frozen=True)
class WindowedSample:
    raw_window: np.ndarray
    diff_window: np.ndarray
    last_obs: np.ndarray
    target_trend: np.ndarray
    target_fluct: np.ndarray
    target_final: np.ndarray
    anchor: int


@dataclass
class SampleSet:
    """Stacked samples; leading axis indexes samples in chronological order."""

    raw: np.ndarray
    diff: np.ndarray
    last: np.ndarray
    trend: np.ndarray
    fluct: np.ndarray
    final: np.ndarray
    anchors: np.ndarray

    def __len__(self):
        return len(self.anchors)

    def __getitem__(self, i):
        return WindowedSample(
            self.raw[i], self.diff[i], self.last[i], self.trend[i], self.fluct[i], self.final[i], int(self.anchors[i])
        )

    def subset(self, index):
        return SampleSet(
            self.raw[index], self.diff[index], self.last[index], self.trend[index],
            self.fluct[index], self.final[index], self.anchors[index],
        )

    def batches(self, batch_size, rng=None):
        """Contiguous chronological batches; batch order is shuffled when ``rng`` is given."""
        starts = np.arange(0, len(self), batch_size)
        if rng is not None:
            starts = starts[rng.permutation(len(starts))]
        for s in starts:
            yield self.subset(slice(s, s + batch_size))


@dataclass
class Samples:
    train: SampleSet
    valid: SampleSet
    test: SampleSet
    window: int
    horizon: int
    split: SplitSpec = field(default_factory=SplitSpec)


def _split_fields(line):
    return line.split("\t") if "\t" in line and "," not in line else line.split(",")


def load_csv(path):
    """Read a headerless file, one timestep per line, one variable per field."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = _split_fields(line)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(f"{path}: line {lineno} has {len(fields)} fields, expected {width}", lineno)
            row = []
            for col, tok in enumerate(fields, start=1):
                try:
                    row.append(float(tok))
                except ValueError:
                    raise ParseError(
                        f"{path}: non-numeric field {tok.strip()!r} at line {lineno}, column {col}", lineno, col
                    ) from None
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: empty input")
    return SeriesMatrix(np.array(rows, dtype=np.float64).T)


def save_csv(path, values):
    """Write an ``n x T`` matrix as one line per timestep."""
    values = np.asarray(values)
    with open(path, "w") as fh:
        for row in values.T:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def normalize(series, train_fraction=0.6):
    """Divide each variable by its max |value| over the first ``train_fraction`` of time."""
    if not 0.0 < train_fraction <= 1.0:
        raise ContractError(f"train_fraction must lie in (0, 1], got {train_fraction}")
    raw = series.denormalize()
    end = max(1, int(train_fraction * series.T))
    peak = np.abs(raw[:, :end]).max(axis=1)
    scale = np.where(peak > 0, peak, 1.0)
    return SeriesMatrix(raw / scale[:, None], scale)


def difference(values):
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] < 2:
        raise ContractError("difference needs at least 2 timesteps")
    return np.diff(values, axis=-1)


def window_view(values, window):
    """All windows ``values[:, t-P+1 : t+1]`` for anchors ``t = P-1 .. T-1``, shape ``[T-P+1, n, P]``."""
    n, T = values.shape
    if window < 1 or T < window:
        raise ContractError(f"need at least window={window} timesteps, got {T}")
    return np.lib.stride_tricks.sliding_window_view(values, window, axis=1).transpose(1, 0, 2)


def _sample_set(values, window, horizon, anchors):
    windows = np.ascontiguousarray(window_view(values, window)[anchors - (window - 1)])
    trend = values[:, anchors + horizon - 1].T.copy()
    fluct = (values[:, anchors + horizon] - values[:, anchors + horizon - 1]).T.copy()
    return SampleSet(
        raw=windows,
        diff=np.diff(windows, axis=2),
        last=windows[:, :, -1].copy(),
        trend=trend,
        fluct=fluct,
        final=trend + fluct,
        anchors=anchors.astype(np.int64),
    )


def build_samples(series, window, horizon, split=None):
    """Split samples chronologically by the index of their final target ``t+h``."""
    split = split or SplitSpec()
    if window < 2:
        raise ContractError(f"window must be >= 2 for a differenced input, got {window}")
    if horizon < 1:
        raise ContractError(f"horizon must be >= 1, got {horizon}")
    if horizon == 1:
        log.warning("horizon=1: the trend target x[t+h-1] equals the observed x[t]")
    values = series.values
    T = series.T
    if T < window + horizon:
        raise EmptySplitError("train", f"series of length {T} is shorter than window + horizon = {window + horizon}")
    anchors = np.arange(window - 1, T - horizon)
    target = anchors + horizon
    train_end, valid_end = split.boundaries(T)
    groups = {
        "train": anchors[target < train_end],
        "valid": anchors[(target >= train_end) & (target < valid_end)],
        "test": anchors[target >= valid_end],
    }
    for name, group in groups.items():
        if len(group) == 0:
            raise EmptySplitError(name, f"{name} split has no samples (T={T}, window={window}, horizon={horizon})")
    sets = {name: _sample_set(values, window, horizon, group) for name, group in groups.items()}
    return Samples(sets["train"], sets["valid"], sets["test"], window, horizon, split)


def write_manifest(path, samples, scale):
    with open(path, "w") as fh:
        fh.write(f"window {samples.window}\nhorizon {samples.horizon}\n")
        fh.write(f"split {samples.split.train!r} {samples.split.valid!r} {samples.split.test!r}\n")
        for name in ("train", "valid", "test"):
            a = getattr(samples, name).anchors
            fh.write(f"{name}_anchors {int(a[0])} {int(a[-1])} {len(a)}\n")
        fh.write("scale " + " ".join(repr(float(s)) for s in scale) + "\n")
