"""Smooth compactly supported windows on (1, 2)."""

from __future__ import annotations

import numpy as np


def _psi(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = _psi(t)
    b = _psi(1.0 - t)
    return a / (a + b)


def plateau_window(t, delta: float = 0.1):
    """Smooth V supported in (1, 2), equal to 1 on [1 + delta, 2 - delta]."""
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    t = np.asarray(t, dtype=float)
    out = smooth_step((t - 1.0) / delta) * smooth_step((2.0 - t) / delta)
    return out if out.ndim else float(out)


def plateau_window_derivative_bound(delta: float, order: int, samples: int = 20001) -> float:
    """Numerical sup |V^(i)| for i = order (finite differences on a fine grid)."""
    t = np.linspace(1.0, 2.0, samples)
    v = plateau_window(t, delta)
    h = t[1] - t[0]
    for _ in range(order):
        v = np.gradient(v, h)
    return float(np.max(np.abs(v)))
