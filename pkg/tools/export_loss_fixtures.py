#!/usr/bin/env python3
"""Export loss fixture pairs with reference values for consumers.

Writes deterministic (g, d) pairs and the loss values this package computes
for them, so an independent training stack can assert agreement without
importing this package.
"""

import json
from pathlib import Path

import numpy as np

from fppforge.metrics import MetricConfig, loss_t1, loss_t2, ssim, unet_loss

OUT = Path(__file__).resolve().parents[1] / "trainkit" / "tests" / "fixtures"


def main() -> None:
    rng = np.random.default_rng(20240229)
    cfg = MetricConfig()
    cases = []
    for i in range(4):
        g = rng.uniform(-1, 1, size=(16, 16))
        d = np.clip(g + 0.2 * rng.normal(size=(16, 16)), -1, 1) if i % 2 else rng.uniform(-1, 1, size=(16, 16))
        cases.append(
            {
                "g": g.tolist(),
                "d": d.tolist(),
                "ssim": ssim(g, d, cfg),
                "loss_t1": loss_t1(g, d, cfg),
                "loss_t2": loss_t2(g, d),
                "unet_loss": unet_loss(g, d, cfg),
            }
        )
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / "loss_fixtures.json"
    path.write_text(json.dumps({"window": cfg.ssim_window, "data_range": cfg.data_range, "cases": cases}, indent=1))
    print(f"wrote {path} ({len(cases)} cases)")


if __name__ == "__main__":
    main()
