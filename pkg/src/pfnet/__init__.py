"""Parallel trend/fluctuation forecasting network with a numpy autodiff core."""

from .data import SampleSet, SeriesMatrix, SplitSpec, WindowedSample, build_samples, difference, load_csv, normalize
from .experiment import RunConfig, RunRecord, ablation, evaluate, forecast, grid_search, train
from .metrics import MetricsReport, compute_metrics
from .model import LossWeights, PFNetConfig, PFNetModel, ifm_fuse, triple_loss, variant_forward
from .optim import Adam
from .tensor import Tensor, backward, no_grad
from .var import VarModel, fit_var, predict_var

__version__ = "0.1.0"

__all__ = [
    "Adam", "LossWeights", "MetricsReport", "PFNetConfig", "PFNetModel", "RunConfig", "RunRecord", "SampleSet",
    "SeriesMatrix", "SplitSpec", "Tensor", "VarModel", "WindowedSample", "ablation", "backward", "build_samples",
    "compute_metrics", "difference", "evaluate", "fit_var", "forecast", "grid_search", "ifm_fuse", "load_csv",
    "no_grad", "normalize", "predict_var", "train", "triple_loss", "variant_forward",
]
