"""Direct multi-horizon vector autoregression fitted by ridge-jittered least squares."""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DataError, SingularFitError

RIDGE = 1e-8


@dataclass
class VarModel:
    """``x[t+h] = intercept + sum_i coefs[i] @ x[t-i]`` for ``i = 0 .. p-1``."""

    coefs: np.ndarray  # [p, n, n]
    intercept: np.ndarray  # [n]
    horizon: int

    def __post_init__(self):
        if self.coefs.ndim != 3 or self.coefs.shape[0] < 1:
            raise ContractError("VAR lag order must be >= 1")
        if not (np.isfinite(self.coefs).all() and np.isfinite(self.intercept).all()):
            raise SingularFitError("VAR coefficients are not finite")

    @property
    def lag(self):
        return self.coefs.shape[0]

    @property
    def n(self):
        return self.coefs.shape[1]

    def predict(self, window):
        return predict_var(self, window)

    def params(self):
        return {"coefs": self.coefs, "intercept": self.intercept}


def _lagged(values, p, anchors):
    # Row for anchor t is [x_t, x_{t-1}, ..., x_{t-p+1}] flattened.
    return np.concatenate([values[:, anchors - i].T for i in range(p)], axis=1)


def fit_var(values, p, horizon):
    """Regress ``x[t+h]`` on the last ``p`` observations of an ``n x T`` training matrix."""
    values = np.asarray(values, dtype=np.float64)
    n, T = values.shape
    if p < 1 or horizon < 1:
        raise ContractError(f"lag and horizon must be >= 1, got p={p}, h={horizon}")
    rows = T - p - horizon + 1
    if rows <= n * p + 1:
        raise DataError(f"VAR(p={p}, h={horizon}) needs more than {n * p + 1} rows, have {rows}")
    anchors = np.arange(p - 1, T - horizon)
    X = _lagged(values, p, anchors)
    Y = values[:, anchors + horizon].T
    # Centering leaves the intercept out of the ridge penalty.
    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - x_mean, Y - y_mean
    gram = Xc.T @ Xc + RIDGE * np.eye(X.shape[1])
    try:
        B = np.linalg.solve(gram, Xc.T @ Yc)  # [n*p, n]
    except np.linalg.LinAlgError as exc:
        raise SingularFitError(f"VAR normal equations are singular: {exc}") from exc
    if not np.isfinite(B).all():
        raise SingularFitError("VAR solve produced non-finite coefficients")
    intercept = y_mean - x_mean @ B
    coefs = B.T.reshape(n, p, n).transpose(1, 0, 2)
    return VarModel(np.ascontiguousarray(coefs), intercept, horizon)


def predict_var(model, window):
    """Forecast from an ``n x L`` window (``L >= p``) or a stack ``[B, n, L]``."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-1] < model.lag:
        raise ContractError(f"window of {window.shape[-1]} steps is shorter than lag {model.lag}")
    out = np.broadcast_to(model.intercept, window.shape[:-1]).copy()
    for i in range(model.lag):
        out += window[..., -1 - i] @ model.coefs[i].T
    return out


def residuals(model, values):
    values = np.asarray(values, dtype=np.float64)
    p, h = model.lag, model.horizon
    anchors = np.arange(p - 1, values.shape[1] - h)
    X = _lagged(values, p, anchors)
    B = np.concatenate([model.coefs[i].T for i in range(p)], axis=0)
    return values[:, anchors + h].T - (X @ B + model.intercept)
