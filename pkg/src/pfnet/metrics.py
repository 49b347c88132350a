import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, MetricError


@dataclass(frozen=True)
class MetricsReport:
    rse: float
    rae: float
    corr: float
    samples: int
    variables: int
    corr_skipped: int = 0

    def to_kv(self):
        return f"rse={self.rse!r}\nrae={self.rae!r}\ncorr={self.corr!r}\n"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def compute_metrics(pred, truth):
    """RSE, RAE and CORR for ``n x M`` prediction/truth matrices (variables x time).

    RSE and RAE are relative to the mean predictor, using one mean over every
    test entry. CORR averages per-variable Pearson correlation across time,
    skipping variables whose truth or prediction has zero variance.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 2:
        raise DimensionError(f"pred {pred.shape} and truth {truth.shape} must be equal 2-D shapes")
    n, m = truth.shape
    if m < 2:
        raise DimensionError(f"need at least 2 time points, got {m}")

    err = pred - truth
    dev = truth - truth.mean()
    sq_den = np.sum(dev * dev)
    abs_den = np.sum(np.abs(dev))
    if sq_den == 0.0 or abs_den == 0.0:
        raise MetricError("truth is constant; RSE/RAE are undefined")
    rse = np.sqrt(np.sum(err * err)) / np.sqrt(sq_den)
    rae = np.sum(np.abs(err)) / abs_den

    pc = pred - pred.mean(axis=1, keepdims=True)
    tc = truth - truth.mean(axis=1, keepdims=True)
    sp = np.sqrt(np.sum(pc * pc, axis=1))
    st = np.sqrt(np.sum(tc * tc, axis=1))
    ok = (sp > 0) & (st > 0)
    if not ok.any():
        raise MetricError("every variable has zero variance; CORR is undefined")
    r = np.sum(pc[ok] * tc[ok], axis=1) / (sp[ok] * st[ok])
    corr = float(np.clip(r.mean(), -1.0, 1.0))
    return MetricsReport(float(rse), float(rae), corr, int(m), int(n), int((~ok).sum()))


class MetricsAccumulator:
    """Collects prediction batches and evaluates once over the concatenation."""

    def __init__(self):
        self._pred = []
        self._truth = []

    def add(self, pred, truth):
        """Append a batch of ``n x b`` (variables x time) columns."""
        self._pred.append(np.asarray(pred, dtype=np.float64))
        self._truth.append(np.asarray(truth, dtype=np.float64))

    def compute(self):
        return compute_metrics(np.concatenate(self._pred, axis=1), np.concatenate(self._truth, axis=1))


def write_report(path, report, fmt="kv"):
    with open(path, "w") as fh:
        if fmt == "kv":
            fh.write(report.to_kv())
        else:
            json.dump(report.to_dict(), fh, indent=2)
