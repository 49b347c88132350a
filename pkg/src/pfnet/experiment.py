"""Training loop, validation-based model selection, grid search, evaluation,
prediction and ablation orchestration.

Randomness: parameter initialization draws from per-parameter generators
seeded by ``(seed, parameter name)``; batch-order shuffling draws from the
generator seeded by ``(seed, "shuffle")``. No other randomness is consumed.
"""

import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import SampleSet, SeriesMatrix, SplitSpec, build_samples, load_csv, normalize, save_csv, window_view, write_manifest
from .errors import ConfigError, DivergenceError, NonFiniteError, PFNetError
from .layers import sub_rng
from .metrics import MetricsReport, compute_metrics, write_report
from .model import NEURAL_KINDS, PFNetConfig, PFNetModel
from .optim import Adam
from .var import VarModel, fit_var, predict_var

log = logging.getLogger(__name__)

MODEL_KINDS = NEURAL_KINDS + ("var", "naive")
VAR_LAGS = (1, 2, 4, 8)


@dataclass
class RunConfig:
    data: str = None
    horizon: int = 3
    model: str = "pfnet"
    window: int = 32
    depth: int = 2
    channels: int = 32
    hw: int = 8
    mlp_hidden: int = 64
    c1: float = 1.0
    c2: float = 1.0
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 1000
    seed: int = 0
    select: str = "rse"
    out: str = "runs/default"
    train_frac: float = 0.6
    valid_frac: float = 0.2

    def validate(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODEL_KINDS}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not 1 <= self.window <= 512:
            raise ConfigError(f"window must lie in 1..512, got {self.window}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.select not in ("rse", "rae"):
            raise ConfigError(f"select must be 'rse' or 'rae', got {self.select!r}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("c1 and c2 must be nonnegative")
        return self

    @property
    def split(self):
        try:
            return SplitSpec(self.train_frac, self.valid_frac, round(1.0 - self.train_frac - self.valid_frac, 12))
        except PFNetError as exc:
            raise ConfigError(str(exc)) from exc

    def network_config(self, n):
        return PFNetConfig(
            n=n, window=self.window, horizon=self.horizon, kind=self.model, depth=self.depth,
            channels=self.channels, hw=self.hw, mlp_hidden=self.mlp_hidden, c1=self.c1, c2=self.c2, seed=self.seed,
        )

    @classmethod
    def from_dict(cls, values):
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw, types[key])
        return cls(**kwargs)


def _coerce(key, raw, typ):
    if raw is None:
        return None
    caster = {"int": int, "float": float, "str": str}.get(typ if isinstance(typ, str) else typ.__name__, str)
    try:
        return caster(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r}: cannot interpret {raw!r} as {caster.__name__}") from exc


def read_config_file(path):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip()] = value.strip()
    return values


@dataclass
class RunRecord:
    config: dict
    epochs: list = field(default_factory=list)
    best_epoch: int = None
    valid: dict = None
    test: dict = None
    timings: dict = field(default_factory=dict)
    checkpoint: str = None
    n_params: int = 0
    anchors: dict = None

    def selection_value(self):
        return self.valid[self.config["select"]]

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


class NaiveForecaster:
    """Persistence: predict the last observation."""

    kind = "naive"

    def predict(self, samples):
        return samples.last.copy()

    def state(self):
        return {}


class VarForecaster:
    kind = "var"

    def __init__(self, model):
        self.model = model

    def predict(self, samples):
        return predict_var(self.model, samples.raw)

    def state(self):
        return {"coefs": self.model.coefs, "intercept": self.model.intercept}


def prepare_data(config, series=None):
    """Load (if needed), normalize on the training prefix, and build samples."""
    if series is None:
        if not config.data:
            raise ConfigError("no data path given")
        series = load_csv(config.data)
    split = config.split
    normed = normalize(series, split.train)
    samples = build_samples(normed, config.window, config.horizon, split)
    return normed, samples


def _evaluate(predictor, samples):
    return compute_metrics(predictor.predict(samples).T, samples.final.T)


def _checkpoint_config(config, n, extra=None):
    d = {
        "model": config.model, "n": n, "window": config.window, "horizon": config.horizon,
        "depth": config.depth, "channels": config.channels, "hw": config.hw, "mlp_hidden": config.mlp_hidden,
        "c1": float(config.c1), "c2": float(config.c2), "seed": config.seed,
        "train_frac": float(config.train_frac), "valid_frac": float(config.valid_frac),
    }
    d.update(extra or {})
    return d


def _train_network(config, samples, record):
    model = PFNetModel(config.network_config(samples.train.raw.shape[1]))
    optimizer = Adam(model.params, lr=config.lr)
    shuffle_rng = sub_rng(config.seed, "shuffle")
    best_value, best_state = np.inf, None
    last_finite = None
    for epoch in range(1, config.epochs + 1):
        total, count = 0.0, 0
        for batch in samples.train.batches(config.batch_size, shuffle_rng):
            try:
                loss = model.loss(batch)
                loss.backward()
            except NonFiniteError as exc:
                raise DivergenceError(epoch, last_finite) from exc
            optimizer.step()
            total += loss.item() * len(batch)
            count += len(batch)
        train_loss = total / count
        if not np.isfinite(train_loss):
            raise DivergenceError(epoch, last_finite)
        last_finite = train_loss
        try:
            valid = _evaluate(model, samples.valid)
        except NonFiniteError as exc:
            raise DivergenceError(epoch, last_finite) from exc
        record.epochs.append({"epoch": epoch, "train_loss": train_loss, "valid": valid.to_dict()})
        value = getattr(valid, config.select)
        if value < best_value:
            best_value, best_state = value, model.state()
            record.best_epoch = epoch
            record.valid = valid.to_dict()
        log.debug("epoch %d loss %.6f valid %s %.6f", epoch, train_loss, config.select, value)
    model.load_state(best_state)
    record.n_params = model.num_parameters()
    return model


def _train_var(config, normed, samples, record):
    train_end, _ = config.split.boundaries(normed.T)
    train_values = normed.values[:, :train_end]
    best_value, best = np.inf, None
    for p in VAR_LAGS:
        if p > config.window:
            continue
        try:
            model = VarForecaster(fit_var(train_values, p, config.horizon))
        except PFNetError as exc:
            log.info("VAR lag %d skipped: %s", p, exc)
            continue
        valid = _evaluate(model, samples.valid)
        record.epochs.append({"lag": p, "valid": valid.to_dict()})
        value = getattr(valid, config.select)
        if value < best_value:
            best_value, best = value, model
            record.valid = valid.to_dict()
            record.best_epoch = p
    if best is None:
        raise ConfigError("no VAR lag order could be fitted")
    record.n_params = int(best.model.coefs.size + best.model.intercept.size)
    return best


def train(config, series=None, evaluate_test=True):
    """Train one configuration and write its checkpoint, record, metrics and manifest to ``config.out``."""
    config.validate()
    started = time.perf_counter()
    normed, samples = prepare_data(config, series)
    record = RunRecord(config=asdict(config))
    record.anchors = {name: [int(getattr(samples, name).anchors[0]), int(getattr(samples, name).anchors[-1])]
                      for name in ("train", "valid", "test")}
    extra = {}
    if config.model in NEURAL_KINDS:
        predictor = _train_network(config, samples, record)
    elif config.model == "var":
        predictor = _train_var(config, normed, samples, record)
        extra["lag"] = predictor.model.lag
    else:
        predictor = NaiveForecaster()
        record.valid = _evaluate(predictor, samples.valid).to_dict()
    record.timings["train_seconds"] = time.perf_counter() - started

    os.makedirs(config.out, exist_ok=True)
    ckpt = os.path.join(config.out, "checkpoint.txt")
    save_checkpoint(ckpt, _checkpoint_config(config, normed.n, extra), normed.scale, predictor.state())
    record.checkpoint = ckpt
    write_manifest(os.path.join(config.out, "split_manifest.txt"), samples, normed.scale)
    if evaluate_test:
        record.test = _evaluate(predictor, samples.test).to_dict()
        write_report(os.path.join(config.out, "metrics.txt"), MetricsReport(**record.test))
    record.timings["total_seconds"] = time.perf_counter() - started
    record.to_json(os.path.join(config.out, "record.json"))
    return record


def load_predictor(ckpt_path):
    """Rebuild ``(predictor, checkpoint config, scale)`` from a checkpoint file."""
    cfg, scale, params = load_checkpoint(ckpt_path)
    kind = cfg["model"]
    if kind in NEURAL_KINDS:
        net = PFNetConfig(
            n=cfg["n"], window=cfg["window"], horizon=cfg["horizon"], kind=kind, depth=cfg["depth"],
            channels=cfg["channels"], hw=cfg["hw"], mlp_hidden=cfg["mlp_hidden"], c1=cfg["c1"], c2=cfg["c2"],
            seed=cfg["seed"],
        )
        predictor = PFNetModel(net)
        predictor.load_state(params)
    elif kind == "var":
        predictor = VarForecaster(VarModel(params["coefs"], params["intercept"], cfg["horizon"]))
    elif kind == "naive":
        predictor = NaiveForecaster()
    else:
        raise ConfigError(f"checkpoint has unknown model kind {kind!r}")
    return predictor, cfg, scale


def _rescale(series, scale, n_expected):
    if series.n != n_expected:
        raise ConfigError(f"data has {series.n} variables but the checkpoint expects {n_expected}")
    return SeriesMatrix(series.values / scale[:, None], scale)


def evaluate(ckpt_path, data, horizon=None):
    """Test-split metrics of a checkpoint, rebuilding the split from its recorded spec and scale."""
    predictor, cfg, scale = load_predictor(ckpt_path)
    if horizon is not None and int(horizon) != cfg["horizon"]:
        raise ConfigError(f"checkpoint was trained for horizon {cfg['horizon']}, not {horizon}")
    series = load_csv(data) if isinstance(data, (str, os.PathLike)) else data
    normed = _rescale(series, scale, cfg["n"])
    split = SplitSpec(cfg["train_frac"], cfg["valid_frac"], round(1.0 - cfg["train_frac"] - cfg["valid_frac"], 12))
    samples = build_samples(normed, cfg["window"], cfg["horizon"], split)
    return _evaluate(predictor, samples.test)


def forecast(ckpt_path, data, out_csv=None):
    """Forecast ``x[t+h]`` for every anchor ``t = P-1 .. T-1``, in original units, shape ``[T-P+1, n]``."""
    predictor, cfg, scale = load_predictor(ckpt_path)
    series = load_csv(data) if isinstance(data, (str, os.PathLike)) else data
    normed = _rescale(series, scale, cfg["n"])
    windows = np.ascontiguousarray(window_view(normed.values, cfg["window"]))
    m, n = windows.shape[0], normed.n
    empty = np.zeros((m, n))
    samples = SampleSet(windows, np.diff(windows, axis=2), windows[:, :, -1].copy(), empty, empty, empty,
                        np.arange(cfg["window"] - 1, normed.T))
    preds = predictor.predict(samples) * scale[None, :]
    if out_csv is not None:
        save_csv(out_csv, preds.T)
    return preds


def _run_point(args):
    config, series = args
    try:
        return train(config, series, evaluate_test=False), None
    except PFNetError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def grid_search(template, grids, series=None, jobs=1):
    """Train every grid point, rank by validation metric, test only the winner.

    Returns ``(best_record, leaderboard)``; the leaderboard lists completed
    runs ascending by validation metric followed by failed points.
    """
    if not grids or any(len(v) == 0 for v in grids.values()):
        raise ConfigError("grid search needs at least one value per grid key")
    keys = list(grids)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grids[k] for k in keys))]
    if series is None and template.data:
        series = load_csv(template.data)
    configs = []
    for point in points:
        tag = "_".join(f"{k}{v}" for k, v in point.items())
        configs.append(replace(template, **point, out=os.path.join(template.out, tag)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_point, [(c, series) for c in configs]))
    else:
        results = [_run_point((c, series)) for c in configs]

    done, failed = [], []
    for point, config, (record, error) in zip(points, configs, results):
        if record is None:
            log.warning("grid point %s failed: %s", point, error)
            failed.append({"point": point, "error": error})
        else:
            done.append((point, record))
    if not done:
        raise PFNetError(f"all {len(points)} grid points failed: {[f['error'] for f in failed]}")
    done.sort(key=lambda pr: pr[1].selection_value())
    best_point, best = done[0]
    report = evaluate(best.checkpoint, series)
    best.test = report.to_dict()
    best.to_json(os.path.join(best.config["out"], "record.json"))
    write_report(os.path.join(best.config["out"], "metrics.txt"), report)
    leaderboard = [
        {"point": point, "valid": rec.valid, "select": rec.config["select"], "out": rec.config["out"]}
        for point, rec in done
    ] + failed
    os.makedirs(template.out, exist_ok=True)
    with open(os.path.join(template.out, "leaderboard.json"), "w") as fh:
        json.dump({"best": best_point, "test": best.test, "leaderboard": leaderboard}, fh, indent=2)
    return best, leaderboard


ABLATION_VARIANTS = ("ltpm_only", "pfnet_xt", "pfnet", "var")
_LABELS = {"ltpm_only": "LTPM", "pfnet_xt": "PFNet-xt", "pfnet": "PFNet", "var": "VAR"}


def ablation(base, horizons=None, seeds=None, series=None, variants=ABLATION_VARIANTS):
    """Train each variant per horizon and seed on shared splits.

    Returns ``(table_text, records)`` where ``records[(variant, horizon, seed)]``
    is a RunRecord and the table reports the median test metric over seeds.
    """
    horizons = list(horizons or [base.horizon])
    seeds = list(seeds or [base.seed])
    if series is None:
        series = load_csv(base.data)
    records = {}
    for variant in variants:
        for h in horizons:
            for seed in seeds:
                out = os.path.join(base.out, f"{variant}_h{h}_s{seed}")
                config = replace(base, model=variant, horizon=h, seed=seed, out=out)
                records[(variant, h, seed)] = train(config, series)
    return format_ablation_table(records, variants, horizons, seeds), records


def format_ablation_table(records, variants, horizons, seeds):
    head = f"{'Methods':<10}{'Metrics':<8}" + "".join(f"{'h=' + str(h):>10}" for h in horizons)
    lines = [head, "-" * len(head)]
    for variant in variants:
        for i, metric in enumerate(("rse", "rae", "corr")):
            label = _LABELS.get(variant, variant) if i == 0 else ""
            cells = []
            for h in horizons:
                vals = [records[(variant, h, s)].test[metric] for s in seeds]
                cells.append(f"{float(np.median(vals)):>10.4f}")
            lines.append(f"{label:<10}{metric.upper():<8}" + "".join(cells))
        lines.append("-" * len(head))
    return "\n".join(lines) + "\n"
