"""Ablation table comparing the three training losses.

The reference columns carry the published full-scale U-Net numbers for
orientation only; desk-scale runs are not expected to reproduce them and
the table labels them accordingly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

# full-scale reference results (U-Net), not reproduced at desk scale
REFERENCE = {
    "L1": {"mae": 0.0257, "msde": 0.0762},
    "SSIM": {"mae": 0.0263, "msde": 0.0713},
    "SSIM+Laplace": {"mae": 0.0260, "msde": 0.0708},
}

_FIELDS = [
    "loss",
    "val_mae",
    "val_msde",
    "val_ssim",
    "val_laplace_err",
    "reference_mae_not_reproduced",
    "reference_msde_not_reproduced",
]


def ablation_report(runs: dict, path=None) -> str:
    """CSV comparing runs keyed by loss name; values are final-epoch metric
    dicts as produced by train(). Returns the CSV text; optionally writes it."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_FIELDS)
    writer.writeheader()
    for name, final in runs.items():
        ref = REFERENCE.get(name, {})
        writer.writerow(
            {
                "loss": name,
                "val_mae": f"{final['val_mae']:.6f}",
                "val_msde": f"{final['val_msde']:.6f}",
                "val_ssim": f"{final['val_ssim']:.6f}",
                "val_laplace_err": f"{final['val_laplace_err']:.6f}",
                "reference_mae_not_reproduced": ref.get("mae", ""),
                "reference_msde_not_reproduced": ref.get("msde", ""),
            }
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
