import json
from pathlib import Path

import numpy as np
import pytest
import torch

from trainkit.losses import (
    l1_loss,
    laplacian,
    loss_gradients,
    loss_t1,
    loss_t2,
    select_loss,
    ssim,
    unet_loss,
)

FIXTURES = Path(__file__).parent / "fixtures" / "loss_fixtures.json"


def finite_difference_grad(loss_fn, g: torch.Tensor, d: torch.Tensor, h=1e-4):
    """Central differences, element by element, in double precision."""
    grad = torch.zeros_like(g)
    flat = g.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + h
        hi = float(loss_fn(g, d))
        flat[i] = orig - h
        lo = float(loss_fn(g, d))
        flat[i] = orig
        out[i] = (hi - lo) / (2 * h)
    return grad


class TestFixtureConsistency:
    def test_matches_exported_reference_values(self):
        doc = json.loads(FIXTURES.read_text())
        assert doc["window"] == 8 and doc["data_range"] == 2.0
        for case in doc["cases"]:
            g = torch.tensor(case["g"], dtype=torch.float64)
            d = torch.tensor(case["d"], dtype=torch.float64)
            assert float(ssim(g, d)) == pytest.approx(case["ssim"], abs=1e-5)
            assert float(loss_t1(g, d)) == pytest.approx(case["loss_t1"], abs=1e-5)
            assert float(loss_t2(g, d)) == pytest.approx(case["loss_t2"], abs=1e-5)
            assert float(unet_loss(g, d)) == pytest.approx(case["unet_loss"], abs=1e-5)


class TestLossBasics:
    def test_ssim_self_is_one(self):
        g = torch.rand(1, 1, 16, 16, dtype=torch.float64) * 2 - 1
        assert float(ssim(g, g)) == pytest.approx(1.0, abs=1e-9)

    def test_laplacian_annihilates_constants(self):
        x = torch.full((1, 1, 8, 8), 0.7, dtype=torch.float64)
        assert laplacian(x).abs().max() == 0.0

    def test_l1_hand_value(self):
        g = torch.zeros(1, 1, 4, 4)
        d = torch.full((1, 1, 4, 4), 0.5)
        assert float(l1_loss(g, d)) == 0.5

    def test_select_loss_names(self):
        for name in ("L1", "SSIM", "SSIM+Laplace"):
            fn = select_loss(name)
            g = torch.rand(1, 1, 64, 64) * 2 - 1
            assert torch.isfinite(fn(g, -g))
        with pytest.raises(ValueError):
            select_loss("L2")

    def test_gradient_at_minimum_of_edge_loss_is_zero(self):
        g = torch.rand(1, 1, 16, 16, dtype=torch.float64)
        grad = loss_gradients(loss_t2, g, g.clone())
        assert grad.abs().max() == 0.0

    def test_gradients_flow_through_composite_loss(self):
        g = torch.rand(1, 1, 64, 64, dtype=torch.float64) * 2 - 1
        d = torch.rand(1, 1, 64, 64, dtype=torch.float64) * 2 - 1
        for name in ("L1", "SSIM", "SSIM+Laplace"):
            grad = loss_gradients(select_loss(name), g, d)
            assert torch.isfinite(grad).all()
            assert grad.abs().max() > 0
