"""Log-log least-squares fits used for scaling checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerFit:
    """``y ~ prefactor * x**exponent``."""

    exponent: float
    prefactor: float
    rms_log_residual: float
    points: int

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "prefactor": self.prefactor,
                "rms_log_residual": self.rms_log_residual, "points": self.points}


def fit_power(x, y) -> PowerFit:
    """Fit a power law to positive data.

    Non-positive or non-finite pairs are dropped; at least two must remain.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points to fit a power law")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return PowerFit(float(slope), float(np.exp(intercept)), float(np.sqrt(np.mean(resid**2))), int(keep.sum()))


def envelope_exponent(x, y, window: tuple[float, float]) -> PowerFit:
    """Power-law fit restricted to ``window[0] <= x <= window[1]``."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    sel = (x >= window[0]) & (x <= window[1])
    return fit_power(x[sel], y[sel])
