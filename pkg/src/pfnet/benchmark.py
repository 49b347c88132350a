"""Reusable benchmark protocols: the synthetic trend+fluctuation study and the
Exchange-Rate study (grid search, seeds, ablation). Both are driven by the
acceptance tests and by the scripts in ``scripts/``.
"""

import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .data import SeriesMatrix, load_csv
from .experiment import RunConfig, ablation, grid_search, train
from .synthetic import sinusoid_ar

log = logging.getLogger(__name__)

EXCHANGE_RATE_ENV = "PFNET_EXCHANGE_RATE"


@dataclass(frozen=True)
class SyntheticStudy:
    n: int = 8
    T: int = 4000
    phi: float = 0.5
    noise: float = 0.3
    data_seed: int = 0
    horizon: int = 3
    window: int = 32
    channels: int = 8
    epochs: int = 100
    hw_grid: tuple = (4, 8, 16)
    seeds: tuple = (0, 1, 2)

    def series(self):
        return SeriesMatrix(sinusoid_ar(n=self.n, T=self.T, phi=self.phi, noise=self.noise, seed=self.data_seed))


def run_synthetic_study(study=SyntheticStudy(), out="runs/synthetic"):
    """PFNet (hw chosen on validation per seed) against VAR and persistence.

    Returns a dict with per-seed PFNet test RSE, its median, the baseline
    test RSEs and wall time.
    """
    start = time.perf_counter()
    series = study.series()
    base = RunConfig(horizon=study.horizon, window=study.window, channels=study.channels,
                     epochs=study.epochs, out=out)
    pfnet = []
    for seed in study.seeds:
        best, _ = grid_search(replace(base, seed=seed, out=os.path.join(out, f"pfnet_s{seed}")),
                              {"hw": list(study.hw_grid)}, series=series)
        pfnet.append(best.test["rse"])
        log.info("seed %d: PFNet test RSE %.4f (hw=%s)", seed, best.test["rse"], best.config["hw"])
    baselines = {}
    for kind in ("var", "naive"):
        rec = train(replace(base, model=kind, out=os.path.join(out, kind)), series)
        baselines[kind] = rec.test["rse"]
    return {
        "pfnet_rse": pfnet,
        "pfnet_median": float(np.median(pfnet)),
        "var_rse": baselines["var"],
        "naive_rse": baselines["naive"],
        "seconds": time.perf_counter() - start,
    }


@dataclass(frozen=True)
class ExchangeRateStudy:
    horizon: int = 3
    windows: tuple = (32, 64, 128)
    hw_grid: tuple = (4, 8, 16)
    seeds: tuple = (0, 1, 2)
    epochs: int = 100


def find_exchange_rate(candidates=("data/exchange_rate.txt", "exchange_rate.txt")):
    """Path of the Exchange-Rate file from the environment or known locations, else None."""
    env = os.environ.get(EXCHANGE_RATE_ENV)
    if env:
        return env if os.path.exists(env) else None
    here = os.path.dirname(os.path.abspath(__file__))
    roots = (os.getcwd(), os.path.normpath(os.path.join(here, "..", "..")))
    for root in roots:
        for rel in candidates:
            path = os.path.join(root, rel)
            if os.path.exists(path):
                return path
    return None


def run_exchange_rate_study(path, study=ExchangeRateStudy(), out="runs/exchange_rate"):
    """Grid search at the first seed, then retrain the winning (window, hw) at
    every seed for PFNet, LTPM-only and PFNet-xt, plus VAR.

    Returns per-variant lists of test metrics ordered like ``study.seeds``.
    """
    start = time.perf_counter()
    series = load_csv(path)
    base = RunConfig(data=path, horizon=study.horizon, epochs=study.epochs, seed=study.seeds[0],
                     out=os.path.join(out, "grid"))
    best, _ = grid_search(base, {"window": list(study.windows), "hw": list(study.hw_grid)}, series=series)
    chosen = replace(base, window=best.config["window"], hw=best.config["hw"], out=os.path.join(out, "ablation"))
    table, records = ablation(chosen, seeds=study.seeds, series=series)
    result = {"window": chosen.window, "hw": chosen.hw, "table": table}
    for variant in ("pfnet", "ltpm_only", "pfnet_xt", "var"):
        tests = [records[(variant, study.horizon, s)].test for s in study.seeds]
        result[variant] = {m: [t[m] for t in tests] for m in ("rse", "rae", "corr")}
    result["seconds"] = time.perf_counter() - start
    return result
