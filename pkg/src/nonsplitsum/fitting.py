"""Log-log least-squares fits used by the cancellation experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExponentFit:
    log_x: np.ndarray
    log_y: np.ndarray
    slope: float
    intercept: float
    residual_norm: float

    @property
    def points(self) -> int:
        return len(self.log_x)

    def margin_below(self, bound: float) -> float:
        return bound - self.slope


def fit_exponent(x, y, min_points: int = 5) -> ExponentFit:
    """Fit log|y| = slope * log x + intercept, dropping exact zeros of y."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    keep = (y > 0) & (x > 0)
    x, y = x[keep], y[keep]
    if len(x) < min_points:
        raise ValueError(f"degenerate grid: {len(x)} usable points, need {min_points}")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ValueError("degenerate grid: all abscissae equal")
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.linalg.norm(ly - (slope * lx + intercept)))
    return ExponentFit(lx, ly, float(slope), float(intercept), resid)
