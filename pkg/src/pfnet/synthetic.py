"""Synthetic series with known structure, for tests and desk-scale experiments."""

import numpy as np
from scipy.linalg import solve_discrete_lyapunov


def sinusoid_ar(n=8, T=4000, phi=0.9, noise=0.1, seed=0):
    """Per-variable sinusoid (random period, phase, amplitude) plus AR(1) noise.

    Returns an ``n x T`` matrix. The slow sinusoid is the long-term trend, the
    AR(1) term the short-term fluctuation.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(T)
    periods = rng.uniform(40.0, 200.0, size=n)
    phases = rng.uniform(0.0, 2 * np.pi, size=n)
    amps = rng.uniform(0.5, 1.5, size=n)
    offsets = rng.uniform(1.0, 3.0, size=n)
    trend = offsets[:, None] + amps[:, None] * np.sin(2 * np.pi * t[None, :] / periods[:, None] + phases[:, None])
    eps = rng.normal(0.0, noise, size=(n, T))
    ar = np.zeros((n, T))
    for i in range(1, T):
        ar[:, i] = phi * ar[:, i - 1] + eps[:, i]
    return trend + ar


def random_walk(n=4, T=1000, step=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.normal(0.0, step, size=(n, T)), axis=1)


def stable_var1_coefs(n=4, radius=0.9, seed=0):
    """Random non-symmetric ``n x n`` matrix with spectral radius ``radius``."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    return radius * A / np.max(np.abs(np.linalg.eigvals(A)))


def var1_process(A, T=2000, sigma=0.01, seed=0, burn_in=500):
    """Simulate ``x[t+1] = A x[t] + eps``, ``eps ~ N(0, sigma^2 I)``; returns ``n x T``."""
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    x = np.zeros(n)
    out = np.empty((n, T))
    for i in range(T + burn_in):
        x = A @ x + rng.normal(0.0, sigma, size=n)
        if i >= burn_in:
            out[:, i - burn_in] = x
    return out


def var1_noise_floor(A, sigma):
    """RSE of the true one-step predictor: ``sqrt(n sigma^2 / trace(Sigma))``.

    ``Sigma`` is the stationary covariance solving ``Sigma = A Sigma A^T + sigma^2 I``.
    """
    n = A.shape[0]
    cov = solve_discrete_lyapunov(A, sigma ** 2 * np.eye(n))
    return float(np.sqrt(n * sigma ** 2 / np.trace(cov)))
