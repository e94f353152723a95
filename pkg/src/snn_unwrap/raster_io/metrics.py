from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidRaster
from .rasters import TWO_PI, CoherenceRaster, WrapCountRaster


@dataclass
class MetricsReport:
    accuracy: float
    masked_accuracy: float | None
    masked_pixels: int
    mask_threshold: float
    rmse: float
    n_pixels: int
    confusion: dict = field(default_factory=dict)  # (truth_k, predicted_k) -> count

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "masked_accuracy": self.masked_accuracy,
            "masked_pixels": self.masked_pixels,
            "mask_threshold": self.mask_threshold,
            "rmse_rad": self.rmse,
            "n_pixels": self.n_pixels,
            "confusion": [
                {"truth": t, "predicted": p, "count": c} for (t, p), c in sorted(self.confusion.items())
            ],
        }


def evaluate(predicted_k: WrapCountRaster, truth_k: WrapCountRaster, coherence: CoherenceRaster,
             mask_threshold: float = 0.3) -> MetricsReport:
    """Pixelwise wrap-count accuracy and phase RMSE.

    The reconstructed phases share the same wrapped term, so the phase error
    per pixel is exactly ``2*pi*(k_pred - k_true)``.  ``masked_accuracy`` is
    ``None`` when no pixel reaches ``mask_threshold``.
    """
    if predicted_k.shape != truth_k.shape or truth_k.shape != coherence.shape:
        raise InvalidRaster(
            f"shape mismatch: predicted {predicted_k.shape}, truth {truth_k.shape}, coherence {coherence.shape}"
        )
    kp = predicted_k.values
    kt = truth_k.values
    hit = kp == kt
    mask = coherence.values >= mask_threshold
    n_masked = int(mask.sum())
    dk = (kp - kt).astype(np.float64)
    confusion = Counter(zip(kt.ravel().tolist(), kp.ravel().tolist()))
    return MetricsReport(
        accuracy=float(hit.mean()),
        masked_accuracy=float(hit[mask].mean()) if n_masked else None,
        masked_pixels=n_masked,
        mask_threshold=float(mask_threshold),
        rmse=float(TWO_PI * np.sqrt(np.mean(dk * dk))),
        n_pixels=int(kp.size),
        confusion=dict(confusion),
    )
