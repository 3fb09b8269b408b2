"""Desk-scale fringe-to-depth learning on fpp-forge datasets."""

from .ablation import REFERENCE, ablation_report
from .data import PairSet, load_pairs, minmax_normalize
from .losses import (
    l1_loss,
    laplacian,
    loss_gradients,
    loss_t1,
    loss_t2,
    select_loss,
    ssim,
    unet_loss,
)
from .model import build_model
from .train import TrainConfig, TrainResult, constant_baseline_mae, evaluate, train

__version__ = "0.1.0"
