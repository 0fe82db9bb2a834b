"""Singular moduli, class polynomials, naive heights of j_D and the Chowla-Selberg check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from .quadratic import FormClass, dirichlet_L, reduced_forms

DEFAULT_PREC = 256
MAX_PREC = 1 << 15


@dataclass(frozen=True)
class HeegnerPoint:
    form: FormClass

    @property
    def imag(self) -> float:
        return math.sqrt(-self.form.discriminant) / (2 * self.form.a)

    def tau(self) -> mpmath.mpc:
        """(-b + i sqrt|D|) / (2a) at the current mpmath precision."""
        f = self.form
        return mpmath.mpc(-f.b, mpmath.sqrt(-f.discriminant)) / (2 * f.a)


def heegner_points(D: int) -> list[HeegnerPoint]:
    return [HeegnerPoint(f) for f in reduced_forms(D)]


def reduce_tau(tau):
    """Move tau into the standard fundamental domain by translations and inversion."""
    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half-plane")
    for _ in range(10_000):
        tau -= mpmath.nint(tau.real)
        if abs(tau) < 1:
            tau = -1 / tau
        else:
            return tau
    raise ArithmeticError("reduction did not terminate")


def _j_reduced(tau) -> mpmath.mpc:
    q = mpmath.expj(2 * mpmath.pi * tau)
    eps = mpmath.mpf(2) ** (-mpmath.mp.prec - 10)
    e4 = mpmath.mpf(0)
    prod = mpmath.mpf(1)
    qn = q
    n = 1
    while True:
        term = n**3 * qn / (1 - qn)
        e4 += term
        prod *= 1 - qn
        if abs(qn) * n**3 < eps:
            break
        n += 1
        qn *= q
    e4 = 1 + 240 * e4
    delta = q * prod**24
    return e4**3 / delta


def j_eval(tau, prec: int = DEFAULT_PREC):
    """j(tau) = E4^3 / Delta with Delta = eta^24 as a product, after reduction to the fundamental domain."""
    with mpmath.workprec(prec):
        return +_j_reduced(reduce_tau(tau))


def _estimate_bits(D: int) -> int:
    """Bits needed to hold the coefficients of P_D plus a safety margin."""
    log_size = sum(math.pi * math.sqrt(-D) / f.a for f in reduced_forms(D))
    return int(log_size / math.log(2)) + 64


@dataclass(frozen=True)
class ClassPolynomial:
    D: int
    coefficients: tuple[int, ...]  # descending powers, leading 1
    max_gap: float
    precision: int
    roots: tuple = field(repr=False, default=())

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x: int) -> int:
        acc = 0
        for c in self.coefficients:
            acc = acc * x + c
        return acc


def _expand(roots) -> list:
    coeffs = [mpmath.mpc(1)]
    for r in roots:
        nxt = coeffs + [mpmath.mpc(0)]
        for i in range(1, len(nxt)):
            nxt[i] -= r * coeffs[i - 1]
        coeffs = nxt
    return coeffs


def class_polynomial(D: int, prec: int = DEFAULT_PREC, gap_target: float = 1e-3) -> ClassPolynomial:
    """prod over reduced forms of (x - j(tau_form)), rounded and certified integral."""
    bits = max(prec, _estimate_bits(D))
    while bits <= MAX_PREC:
        with mpmath.workprec(bits):
            roots = [_j_reduced(p.tau()) for p in heegner_points(D)]
            coeffs = _expand(roots)
            ints = [int(mpmath.nint(c.real)) for c in coeffs]
            gap = max(float(abs(c - i)) for c, i in zip(coeffs, ints))
        if gap < gap_target:
            return ClassPolynomial(D, tuple(ints), gap, bits, tuple(roots))
        bits *= 2
    raise ArithmeticError(f"rounding gap {gap} at {bits // 2} bits for D={D}")


def _log_plus(x) -> float:
    return max(0.0, float(mpmath.log(abs(x))))


def singular_moduli(D: int, prec: int = 64) -> list:
    with mpmath.workprec(prec):
        return [_j_reduced(p.tau()) for p in heegner_points(D)]


def mahler_log(poly: ClassPolynomial, tol: float = 1e-12) -> float:
    """log M(P) as the mean of log|P| over the unit circle, doubling the node count until stable."""
    with mpmath.workprec(poly.precision + 64):
        coeffs = [mpmath.mpf(c) for c in poly.coefficients]
        nodes = 32
        previous = None
        while nodes <= 1 << 16:
            total = mpmath.fsum(
                mpmath.log(abs(mpmath.polyval(coeffs, mpmath.expjpi(mpmath.mpf(2 * k) / nodes))))
                for k in range(nodes)
            )
            value = float(total / nodes)
            if previous is not None and abs(value - previous) < tol:
                return value
            previous = value
            nodes *= 2
    raise ArithmeticError(f"circle mean did not settle for D={poly.D}")


@dataclass(frozen=True)
class NaiveHeight:
    D: int
    h: int
    height: float  # h(j_D) = (1/h) sum log+ |j^sigma|
    mahler_log: float | None
    calL: float

    @property
    def ratio(self) -> float:
        return self.height / (6 * self.calL)

    @property
    def identity_gap(self) -> float | None:
        if self.mahler_log is None:
            return None
        return abs(self.h * self.height - self.mahler_log)


def naive_height(D: int, with_mahler: bool = True, prec: int = DEFAULT_PREC) -> NaiveHeight:
    if with_mahler:
        poly = class_polynomial(D, prec)
        js = poly.roots
        mlog = mahler_log(poly)
    else:
        js = singular_moduli(D)
        mlog = None
    h = len(js)
    height = sum(_log_plus(j) for j in js) / h
    return NaiveHeight(D, h, height, mlog, dirichlet_L(D).calL)


@dataclass(frozen=True)
class NormComparison:
    D: int
    half_log_norm: float
    height_sum: float
    log_at_1728: float

    @property
    def ratio(self) -> float:
        return self.half_log_norm / self.height_sum


def norm_comparison(D: int) -> NormComparison:
    """(1/2) log |P_D(0)| against h(D) h(j_D); also log |P_D(1728)|."""
    js = singular_moduli(D, prec=128)
    with mpmath.workprec(128):
        log_norm = float(sum(mpmath.log(abs(j)) for j in js))
        log_1728 = float(sum(mpmath.log(abs(j - 1728)) for j in js))
    height_sum = sum(_log_plus(j) for j in js)
    return NormComparison(D, 0.5 * log_norm, height_sum, log_1728)


def chowla_selberg_check(D: int, calL_scale: float = 1.0) -> float:
    """-(2/h) sum log(sqrt(Im tau) |eta(tau)|^2) - calL_D over the Heegner points of discriminant D.

    Up to an absolute constant the first term is twice the Faltings height of
    an elliptic curve with CM by the maximal order; the gap is independent of D.
    """
    pts = heegner_points(D)
    with mpmath.workprec(128):
        total = mpmath.mpf(0)
        for p in pts:
            tau = p.tau()
            total += mpmath.log(mpmath.sqrt(tau.imag) * abs(_eta(tau)) ** 2)
    return float(-2 * total / len(pts)) - calL_scale * dirichlet_L(D).calL


def _eta(tau):
    q = mpmath.expj(2 * mpmath.pi * tau)
    return mpmath.expj(mpmath.pi * tau / 12) * mpmath.qp(q)
