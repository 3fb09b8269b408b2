"""Differentiable training losses matching the dataset toolkit's metrics.

Conventions are the same as on the evaluation side: inputs normalized to
[-1, 1] (dynamic range 2), SSIM over a uniform 8x8 window slid with stride
1 on replicate-padded images with population moments, and the edge term as
the mean absolute difference of 3x3 Laplacian responses.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

DATA_RANGE = 2.0
SSIM_WINDOW = 8
LAMBDA1 = 100.0
LAMBDA2 = 10.0

_LAPLACIAN = torch.tensor([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def _as_nchw(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x[None, None]
    if x.dim() == 3:
        return x[:, None]
    return x


def _box_mean(x: torch.Tensor, win: int) -> torch.Tensor:
    lo = (win - 1) // 2
    hi = win - 1 - lo
    padded = F.pad(x, (lo, hi, lo, hi), mode="replicate")
    return F.avg_pool2d(padded, kernel_size=win, stride=1)


def ssim(g: torch.Tensor, d: torch.Tensor, data_range: float = DATA_RANGE) -> torch.Tensor:
    """Mean structural similarity (differentiable)."""
    g = _as_nchw(g)
    d = _as_nchw(d)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_g = _box_mean(g, SSIM_WINDOW)
    mu_d = _box_mean(d, SSIM_WINDOW)
    var_g = _box_mean(g * g, SSIM_WINDOW) - mu_g * mu_g
    var_d = _box_mean(d * d, SSIM_WINDOW) - mu_d * mu_d
    cov = _box_mean(g * d, SSIM_WINDOW) - mu_g * mu_d
    num = (2 * mu_g * mu_d + c1) * (2 * cov + c2)
    den = (mu_g * mu_g + mu_d * mu_d + c1) * (var_g + var_d + c2)
    return (num / den).mean()


def laplacian(x: torch.Tensor) -> torch.Tensor:
    x = _as_nchw(x)
    kernel = _LAPLACIAN.to(dtype=x.dtype, device=x.device)[None, None]
    padded = F.pad(x, (1, 1, 1, 1), mode="replicate")
    return F.conv2d(padded, kernel)


def loss_t1(g: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """Structural term 1 - SSIM."""
    return 1.0 - ssim(g, d)


def loss_t2(g: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """Edge term: mean |La(g) - La(d)|."""
    return (laplacian(g) - laplacian(d)).abs().mean()


def l1_loss(g: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    return (g - d).abs().mean()


def unet_loss(
    g: torch.Tensor,
    d: torch.Tensor,
    lambda1: float = LAMBDA1,
    lambda2: float = LAMBDA2,
) -> torch.Tensor:
    return lambda1 * loss_t1(g, d) + lambda2 * loss_t2(g, d)


LOSS_NAMES = ("L1", "SSIM", "SSIM+Laplace")


def select_loss(name: str, lambda1: float = LAMBDA1, lambda2: float = LAMBDA2):
    """Loss factory for the ablation protocol.

    SSIM is the weighted structural term alone (lambda2 = 0), so the
    SSIM+Laplace objective differs from it only by the edge term.
    """
    if name == "L1":
        return l1_loss
    if name == "SSIM":
        return lambda g, d: unet_loss(g, d, lambda1, 0.0)
    if name == "SSIM+Laplace":
        return lambda g, d: unet_loss(g, d, lambda1, lambda2)
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


def loss_gradients(loss_fn, g: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """Analytic gradient of loss_fn with respect to the prediction g."""
    g = g.detach().clone().requires_grad_(True)
    loss_fn(g, d).backward()
    return g.grad.detach().clone()
