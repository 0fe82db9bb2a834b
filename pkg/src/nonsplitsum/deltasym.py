"""The delta-symbol kernel: bumps W and omega, Delta_q, and the detection identity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expsums import ramanujan


def bump(t):
    """exp(1 - 1/(1 - t^2)) on (-1, 1), zero outside; W(0) = 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out if out.ndim else float(out)


def bump_derivative(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    ti = t[inside]
    s = 1.0 - ti * ti
    out[inside] = np.exp(1.0 - 1.0 / s) * (-2.0 * ti / (s * s))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DeltaKernel:
    U: float
    Omega: float
    omega_scale: float  # omega(r) = omega_scale * bump((r - 1.5 Omega) / (0.5 Omega))

    @property
    def Q(self) -> float:
        return max(self.Omega, self.U / self.Omega)

    @property
    def q_cutoff(self) -> float:
        """Delta_q phi vanishes identically for q >= this value.

        The r = 1 term omega(q) survives up to q < 2 Omega, so the true
        support is q < max(2 Omega, U / Omega).
        """
        return max(2 * self.Omega, self.U / self.Omega)

    def W(self, t):
        return bump(t)

    def phi(self, u):
        return bump(np.asarray(u, dtype=float) / self.U)

    def omega(self, r):
        return self.omega_scale * bump((np.asarray(r, dtype=float) - 1.5 * self.Omega) / (0.5 * self.Omega))

    def omega_prime(self, r):
        return self.omega_scale * bump_derivative((np.asarray(r, dtype=float) - 1.5 * self.Omega) / (0.5 * self.Omega)) / (
            0.5 * self.Omega
        )

    def lattice_sum(self) -> float:
        r = np.arange(math.floor(self.Omega) + 1, math.ceil(2 * self.Omega))
        return float(self.omega(r).sum())


def build_kernel(U: float, Omega: float) -> DeltaKernel:
    if U <= 1 or Omega <= 1:
        raise ValueError("U and Omega must exceed 1")
    r = np.arange(math.floor(Omega) + 1, math.ceil(2 * Omega))
    raw = bump((r - 1.5 * Omega) / (0.5 * Omega)).sum() if len(r) else 0.0
    if raw == 0.0:
        raise ValueError(f"no integer lies in the support ({Omega}, {2 * Omega})")
    return DeltaKernel(float(U), float(Omega), 1.0 / float(raw))


def _r_range(lo: float, hi: float) -> np.ndarray:
    """Positive integers r with lo < r < hi."""
    a = max(1, math.floor(lo) + 1)
    b = math.ceil(hi) - 1
    return np.arange(a, b + 1, dtype=float) if b >= a else np.zeros(0)


def delta_q(kernel: DeltaKernel, q: float, u) -> np.ndarray | float:
    """Delta_q(u) = sum_r (1/(q r)) [omega(q r) - omega(|u| / (q r))].

    q may be any positive real (the natural continuous extension); the
    r-ranges are the exact supports of the two omega terms. The second term
    uses |u|, which is how the sum is to be read for negative arguments.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    Om = kernel.Omega
    r1 = _r_range(Om / q, 2 * Om / q)
    first = float((kernel.omega(q * r1) / (q * r1)).sum()) if len(r1) else 0.0
    u_arr = np.abs(np.atleast_1d(np.asarray(u, dtype=float)))
    second = np.zeros_like(u_arr)
    umax = float(u_arr.max()) if len(u_arr) else 0.0
    if umax > 0:
        r2 = _r_range(0.0, umax / (Om * q))
        for r in r2:
            vals = kernel.omega(u_arr / (q * r))
            second += vals / (q * r)
    out = first - second
    return float(out[0]) if np.ndim(u) == 0 else out


def delta_q_first(kernel: DeltaKernel, q: float) -> float:
    """The u-independent part sum_r omega(q r)/(q r)."""
    Om = kernel.Omega
    r1 = _r_range(Om / q, 2 * Om / q)
    return float((kernel.omega(q * r1) / (q * r1)).sum()) if len(r1) else 0.0


def delta_q_phi(kernel: DeltaKernel, q: float, u) -> np.ndarray | float:
    return delta_q(kernel, q, u) * kernel.phi(u)


def delta_expansion(kernel: DeltaKernel, n: int) -> float:
    """phi(n) sum_q Delta_q(n) c_q(n), over the finite q-range where the terms live."""
    ph = float(kernel.phi(n))
    if ph == 0.0:
        return 0.0
    total = 0.0
    for q in range(1, math.ceil(kernel.q_cutoff) + 1):
        dq = delta_q(kernel, q, float(n))
        if dq != 0.0:
            total += dq * ramanujan(q, n)
    return ph * total


def delta_identity_check(kernel: DeltaKernel, n: int) -> float:
    return abs(delta_expansion(kernel, n) - (1.0 if n == 0 else 0.0))


def vanishes_beyond(kernel: DeltaKernel, q_values, u_values) -> float:
    """max |Delta_q phi(u)| over the given grid (should be 0 for q >= q_cutoff)."""
    u = np.asarray(u_values, dtype=float)
    return max(float(np.max(np.abs(delta_q_phi(kernel, q, u)))) for q in q_values)


@dataclass(frozen=True)
class KernelBoundProfile:
    value_constant: float  # sup |Delta_q(u)| / (Omega^-2 + (q Omega + |u|)^-1)
    derivative_constant: float  # sup |d/dq Delta_q(u)| / (q^-1 Omega^-2 + q^-2 Omega^-1)
    points: int


def kernel_bound_profile(
    kernel: DeltaKernel,
    q_values=None,
    u_values=None,
    step: float = 1e-4,
) -> KernelBoundProfile:
    """Empirical constants in the two uniform bounds for Delta_q and its q-derivative."""
    Om = kernel.Omega
    if q_values is None:
        q_values = np.unique(np.round(np.geomspace(1, kernel.q_cutoff, 40), 3))
    if u_values is None:
        u_values = np.concatenate([[0.0], np.geomspace(1.0, kernel.U, 200)])
    u = np.asarray(u_values, dtype=float)
    c_val = 0.0
    c_der = 0.0
    for q in np.atleast_1d(q_values):
        q = float(q)
        vals = np.abs(np.atleast_1d(delta_q(kernel, q, u))) * (np.abs(u) < kernel.U)
        c_val = max(c_val, float(np.max(vals / (Om**-2 + 1.0 / (q * Om + np.abs(u))))))
        if q - step > 0:
            d = (np.atleast_1d(delta_q(kernel, q + step, u)) - np.atleast_1d(delta_q(kernel, q - step, u))) / (2 * step)
            d = np.abs(d) * (np.abs(u) < kernel.U)
            c_der = max(c_der, float(np.max(d / (1.0 / (q * Om * Om) + 1.0 / (q * q * Om)))))
    return KernelBoundProfile(c_val, c_der, len(np.atleast_1d(q_values)) * len(u))


def omega_derivative_constants(kernel: DeltaKernel, max_order: int = 3, samples: int = 40001) -> list[float]:
    """c_i = sup |omega^(i)| * Omega^(i+1), i = 0..max_order, by repeated central differences."""
    Om = kernel.Omega
    r = np.linspace(Om, 2 * Om, samples)
    v = kernel.omega(r)
    step = r[1] - r[0]
    out = []
    for i in range(max_order + 1):
        out.append(float(np.max(np.abs(v))) * Om ** (i + 1))
        v = np.gradient(v, step)
    return out
