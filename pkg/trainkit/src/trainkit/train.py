"""Training loop and per-epoch metric logging for the ablation protocol."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import PairSet
from .losses import LOSS_NAMES, loss_t1, loss_t2, select_loss, ssim
from .model import build_model


@dataclass
class TrainConfig:
    loss: str = "SSIM+Laplace"
    lambda1: float = 100.0
    lambda2: float = 10.0
    batch: int = 4
    lr: float = 0.0003
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    epochs: int = 13
    image_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")


@dataclass
class TrainResult:
    config: TrainConfig
    history: list = field(default_factory=list)
    model: torch.nn.Module | None = None

    @property
    def final(self) -> dict:
        return self.history[-1]

    def save_log(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=sorted(self.history[0]))
            writer.writeheader()
            writer.writerows(self.history)
        return path

    def save_checkpoint(self, path) -> Path:
        path = Path(path)
        torch.save({"config": vars(self.config), "state": self.model.state_dict()}, path)
        return path


def evaluate(model: torch.nn.Module, data: PairSet, batch: int = 16) -> dict:
    """Val metrics: MAE, MSDE (mean per-image std of signed error), SSIM,
    plus the Laplacian-edge error used by the ablation comparison.

    Equal image sizes make the batched window means equal to the average of
    per-image values, so everything runs batched.
    """
    model.eval()
    maes, sds = [], []
    ssim_sum = 0.0
    la_sum = 0.0
    with torch.no_grad():
        for lo in range(0, len(data), batch):
            g = model(torch.from_numpy(data.fringe[lo : lo + batch]))
            d = torch.from_numpy(data.depth[lo : lo + batch])
            err = g - d
            maes.append(err.abs().mean(dim=(1, 2, 3)))
            sds.append(err.std(dim=(1, 2, 3), unbiased=False))
            ssim_sum += float(ssim(g, d)) * len(g)
            la_sum += float(loss_t2(g, d)) * len(g)
    n = len(data)
    return {
        "mae": float(torch.cat(maes).mean()),
        "msde": float(torch.cat(sds).mean()),
        "ssim": ssim_sum / n,
        "laplace_err": la_sum / n,
    }


def constant_baseline_mae(train: PairSet, val: PairSet) -> float:
    """Val MAE of the constant predictor that outputs the mean train depth."""
    constant = float(train.depth.mean())
    return float(np.abs(val.depth - constant).mean())


def train(config: TrainConfig, train_set: PairSet, val_set: PairSet) -> TrainResult:
    """Run the full protocol: Adam, fixed seed, per-epoch train/val metrics.

    Aborts with a diagnostic if the loss ever becomes non-finite.
    """
    torch.manual_seed(config.seed)
    model = build_model(config.image_size)
    loss_fn = select_loss(config.loss, config.lambda1, config.lambda2)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr, betas=(config.adam_beta1, config.adam_beta2)
    )
    shuffler = np.random.default_rng(config.seed)
    result = TrainResult(config=config, model=model)
    track_terms = config.loss == "SSIM+Laplace"
    n = len(train_set)
    for epoch in range(config.epochs):
        model.train()
        order = shuffler.permutation(n)
        epoch_losses = []
        t1_terms = []
        t2_terms = []
        for lo in range(0, n, config.batch):
            idx = order[lo : lo + config.batch]
            g = model(torch.from_numpy(train_set.fringe[idx]))
            d = torch.from_numpy(train_set.depth[idx])
            loss = loss_fn(g, d)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite {config.loss} loss at "
                    f"epoch {epoch}, step {lo // config.batch}"
                )
            if track_terms:
                with torch.no_grad():
                    t1_terms.append(config.lambda1 * float(loss_t1(g, d)))
                    t2_terms.append(config.lambda2 * float(loss_t2(g, d)))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        row = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses))}
        if track_terms:
            row["train_t1_weighted"] = float(np.mean(t1_terms))
            row["train_t2_weighted"] = float(np.mean(t2_terms))
        row.update({f"val_{k}": v for k, v in evaluate(model, val_set).items()})
        result.history.append(row)
    return result
