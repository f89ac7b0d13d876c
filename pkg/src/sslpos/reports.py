"""Evaluation report container and quantile metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def accuracy_at_quantile(errors: np.ndarray, q: float = 0.9) -> float:
    """Empirical q-quantile of the error sample with linear interpolation.

    Sorted errors are interpolated at fractional rank q * (n - 1); q at
    the limits clamps to the extreme order statistics.
    """
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("quantile of an empty error sample")
    if not (0.0 < q < 1.0):
        raise ValueError("q must lie strictly between 0 and 1")
    return float(np.quantile(errors, q, method="linear"))


@dataclass
class EvalReport:
    """Per-scheme evaluation summary over a test set."""

    scheme: str
    errors: np.ndarray
    err_at_90: float
    mean_err: float
    seed: int = 0
    config_hash: str = ""
    wall_time: float = 0.0

    def to_dict(self, include_errors: bool = False) -> dict:
        d = {
            "scheme": self.scheme,
            "err_at_90": self.err_at_90,
            "mean_err": self.mean_err,
            "n_test": int(self.errors.size),
            "seed": self.seed,
            "config_hash": self.config_hash,
            "wall_time": self.wall_time,
        }
        if include_errors:
            d["errors"] = [float(e) for e in self.errors]
        return d
