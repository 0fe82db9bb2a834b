"""Complete exponential sums: Kloosterman, Ramanujan and the Jacobi-type sums J."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numba
import numpy as np

from .arith import divisors, factorint, inverse_mod, kronecker, mobius, tau
from .fitting import ExponentFit, fit_exponent


@dataclass(frozen=True)
class JSumParams:
    n1: int
    r1: int
    n2: int
    r2: int
    q: int = 1
    C: int = field(init=False)

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("modulus must be >= 1")
        c = (abs(self.r1 * self.r1 - 4 * self.n1) + 1) * (abs(self.r2 * self.r2 - 4 * self.n2) + 1)
        object.__setattr__(self, "C", c)

    def with_modulus(self, q: int) -> "JSumParams":
        return JSumParams(self.n1, self.r1, self.n2, self.r2, q)

    def swapped(self) -> "JSumParams":
        return JSumParams(self.n2, self.r2, self.n1, self.r1, self.q)


@lru_cache(maxsize=64)
def roots_of_unity(q: int) -> np.ndarray:
    k = np.arange(q)
    return np.exp(2j * np.pi * k / q)


@numba.njit(cache=True)
def _inverse_table(q):
    inv = np.zeros(q, dtype=np.int64)
    for x in range(q):
        a, b = x, q
        s0, s1 = 1, 0
        while b:
            t = a // b
            a, b = b, a - t * b
            s0, s1 = s1, s0 - t * s1
        if a == 1:
            inv[x] = s0 % q
    if q == 1:
        inv[0] = 0
    return inv


@lru_cache(maxsize=64)
def inverse_table(q: int) -> np.ndarray:
    """inv[x] = x^{-1} mod q for units x, 0 for non-units."""
    return _inverse_table(q)


def units(q: int) -> np.ndarray:
    if q == 1:
        return np.zeros(1, dtype=np.int64)
    x = np.arange(q, dtype=np.int64)
    return x[np.gcd(x, q) == 1]


def e_2q(r1r2: int, q: int) -> complex:
    """e_{2q}(r1 r2), with the rational reduced mod 2q before exponentiating."""
    k = r1r2 % (2 * q)
    return complex(np.exp(1j * np.pi * k / q))


def kloosterman(m: int, n: int, q: int) -> float:
    if q < 1:
        raise ValueError("modulus must be >= 1")
    x = units(q)
    xbar = inverse_table(q)[x]
    phase = (m * x + n * xbar) % q
    total = roots_of_unity(q)[phase].sum()
    if abs(total.imag) > 1e-9 * max(1.0, q):
        raise ArithmeticError("Kloosterman sum has a non-negligible imaginary part")
    return float(total.real)


def kloosterman_row(m: int, q: int) -> np.ndarray:
    """S(m, b; q) for b = 0..q-1 by direct summation."""
    x = units(q)
    xbar = inverse_table(q)[x]
    b = np.arange(q, dtype=np.int64)
    phase = ((m * x)[None, :] + b[:, None] * xbar[None, :]) % q
    return roots_of_unity(q)[phase].sum(axis=1).real


def kloosterman_table(q: int) -> np.ndarray:
    """S(a, b; q) for all residues a, b."""
    x = units(q)
    xbar = inverse_table(q)[x]
    a = np.arange(q, dtype=np.int64)
    roots = roots_of_unity(q)
    left = roots[(a[:, None] * x[None, :]) % q]
    right = roots[(xbar[:, None] * a[None, :]) % q]
    return (left @ right).real


def ramanujan(q: int, n: int) -> int:
    """c_q(n) = sum_{d | (n, q)} d mu(q/d)."""
    if q < 1:
        raise ValueError("modulus must be >= 1")
    g = math.gcd(n, q) if n else q
    return sum(d * mobius(q // d) for d in divisors(g))


def weil_bound(m: int, n: int, q: int) -> float:
    return tau(q) * math.sqrt(math.gcd(math.gcd(m, n), q)) * math.sqrt(q)


def _as_params(params, q: int | None = None) -> JSumParams:
    if isinstance(params, JSumParams):
        return params if q is None else params.with_modulus(q)
    n1, r1, n2, r2, *rest = params
    return JSumParams(n1, r1, n2, r2, q if q is not None else (rest[0] if rest else 1))


def jsum(params, q: int | None = None, chunk: int = 1 << 21) -> complex:
    """J(n1, r1; n2, r2; q) by the direct double sum over y mod q and units x."""
    p = _as_params(params, q)
    q = p.q
    if q == 1:
        return e_2q(p.r1 * p.r2, 1)
    y = np.arange(q, dtype=np.int64)
    inner = (y * y + p.r1 * y + p.n1) % q
    lin_y = (p.r2 * y) % q
    x = units(q)
    xbar = inverse_table(q)[x]
    roots = roots_of_unity(q)
    total = 0j
    step = max(1, chunk // q)
    for start in range(0, len(x), step):
        xs = x[start : start + step]
        xb = xbar[start : start + step]
        phase = (inner[None, :] * xb[:, None] + ((p.n2 * xs) % q)[:, None] + lin_y[None, :]) % q
        total += roots[phase].sum()
    return e_2q(p.r1 * p.r2, q) * total / q


def jsum_fast(params, q: int | None = None) -> complex:
    """J via the Kloosterman row S(n2, A; q) for every A, obtained with one FFT."""
    p = _as_params(params, q)
    q = p.q
    if q == 1:
        return e_2q(p.r1 * p.r2, 1)
    inv = inverse_table(q)
    t = units(q)
    c = np.zeros(q, dtype=complex)
    c[t] = roots_of_unity(q)[(p.n2 * inv[t]) % q]
    K = np.fft.ifft(c) * q  # K[A] = sum_t c_t e(A t / q) = S(A, n2; q)
    y = np.arange(q, dtype=np.int64)
    A = (y * y + p.r1 * y + p.n1) % q
    total = np.dot(roots_of_unity(q)[(p.r2 * y) % q], K[A])
    return e_2q(p.r1 * p.r2, q) * total / q


def jsum_via_kloosterman(d: int, m: int, l: int, q: int) -> complex:
    """(1/q) sum_{n mod q} S(m, n^2 + d; q) e_q(l n)."""
    if q == 1:
        return 1.0 + 0j
    row = kloosterman_row(m, q)
    n = np.arange(q, dtype=np.int64)
    return complex(np.dot(row[(n * n + d) % q], roots_of_unity(q)[(l * n) % q]) / q)


def _bezout_inverses(q1: int, q2: int) -> tuple[int, int]:
    """(u, v) with u q1 + v q2 = 1 exactly, so u = q1^-1 (q2) and v = q2^-1 (q1).

    The exact identity matters: the factor e_{2q}(r1 r2) is only defined for
    residues modulo 2q, so arbitrary inverse representatives break the
    factorization by a sign whenever r1 r2 is odd.
    """
    old_r, r, old_s, s, old_t, t = q1, q2, 1, 0, 0, 1
    while r:
        k = old_r // r
        old_r, r = r, old_r - k * r
        old_s, s = s, old_s - k * s
        old_t, t = t, old_t - k * t
    if old_r != 1:
        raise ValueError("moduli must be coprime")
    return old_s, old_t


def _twisted_factors(p: JSumParams, q1: int, q2: int) -> tuple[JSumParams, JSumParams]:
    inv1, inv2 = _bezout_inverses(q1, q2)
    left = JSumParams(p.n1 * inv2 * inv2, p.r1 * inv2, p.n2, p.r2, q1)
    right = JSumParams(p.n1 * inv1 * inv1, p.r1 * inv1, p.n2, p.r2, q2)
    return left, right


def jsum_crt(params, q: int | None = None) -> complex:
    """J assembled over prime-power factors of q through twisted multiplicativity."""
    p = _as_params(params, q)
    q = p.q
    factors = [pp**k for pp, k in sorted(factorint(q).items())] if q > 1 else []
    if len(factors) <= 1:
        return jsum(p)
    head = factors[0]
    rest = q // head
    left, right = _twisted_factors(p, head, rest)
    return jsum(left) * jsum_crt(right)


def check_twisted_multiplicativity(params, q: int, q_prime: int) -> float:
    """|J(.; q q') - J(n1 q'^-2, r1 q'^-1; .; q) J(n1 q^-2, r1 q^-1; .; q')|."""
    if math.gcd(q, q_prime) != 1:
        raise ValueError("moduli must be coprime")
    p = _as_params(params, q * q_prime)
    left, right = _twisted_factors(p, q, q_prime)
    return abs(jsum(p) - jsum(left) * jsum(right))


def check_index_symmetry(params, q: int | None = None) -> float:
    p = _as_params(params, q)
    return abs(jsum(p) - jsum(p.swapped()))


def check_reduction_lemma(D: int, l: int, m: int, e: int, N2: int, q: int) -> float:
    """Residual of J(-e^2 D, 0, m N2^-1, l; q) = chi_D(N3) J(-e'^2 D, 0, m N2, l N2; q N3)."""
    if N2 < 1 or N2 % 2 == 0 or any(k > 1 for k in factorint(N2).values()):
        raise ValueError("N2 must be odd and squarefree")
    if math.gcd(N2, D) != 1 or math.gcd(N2, q) != 1:
        raise ValueError("N2 must be coprime to D and q")
    N4 = math.gcd(N2, e)
    N3 = N2 // N4
    e_prime = e // N4
    left = jsum((-e * e * D, 0, m * inverse_mod(N2, q), l), q)
    right = kronecker(D, N3) * jsum((-e_prime * e_prime * D, 0, m * N2, l * N2), q * N3)
    return abs(left - right)


def chi_from_jsum(D: int, p: int) -> complex:
    """J(-D, 0; 0, 0; p), which equals chi_D(p) for odd primes p not dividing D."""
    return jsum((-D, 0, 0, 0), p)


Summand = Callable[[JSumParams], complex]


def theorem_a_window(params, Q: float, a: int = 1, summand: Summand = jsum_fast) -> complex:
    """sum over Q < q < 2Q with a | q of J(n1, r1; n2, r2; q)."""
    if Q < 1 or a < 1:
        raise ValueError("need Q >= 1 and a >= 1")
    p = _as_params(params)
    lo = math.floor(Q) + 1
    hi = math.ceil(2 * Q) - 1
    first = -(-lo // a) * a
    total = 0j
    for q in range(first, hi + 1, a):
        total += summand(p.with_modulus(q))
    return total


def cancellation_exponent_fit(
    family: Callable[[float], Iterable[Sequence[int] | JSumParams]],
    Q_grid: Sequence[float],
    a: int = 1,
    summand: Summand = jsum_fast,
) -> ExponentFit:
    """Slope of log(RMS window sum) against log Q.

    family(Q) yields the parameter tuples sampled at scale Q; the window sums
    over those tuples are combined in root-mean-square.
    """
    if len(Q_grid) < 5:
        raise ValueError("need at least 5 grid points")
    values = []
    for Q in Q_grid:
        sums = [theorem_a_window(_as_params(p), Q, a, summand) for p in family(Q)]
        if not sums:
            raise ValueError(f"family is empty at Q={Q}")
        values.append(math.sqrt(np.mean(np.abs(np.array(sums)) ** 2)))
    return fit_exponent(Q_grid, values)


def default_family(trials: int = 4, seed: int = 0) -> Callable[[float], list[JSumParams]]:
    """J(d, 0; 1, 0; q) with d prime, d = 3 (4), d ~ Q^2/20, so that C = 5(4d+1) ~ Q^2."""
    from sympy import nextprime

    def family(Q: float) -> list[JSumParams]:
        rng = np.random.default_rng([seed, int(Q)])
        out = []
        base = max(int(Q * Q / 20), 7)
        for _ in range(trials):
            d = int(nextprime(base + int(rng.integers(0, max(base // 4, 1)))))
            while d % 4 != 3:
                d = int(nextprime(d))
            out.append(JSumParams(d, 0, 1, 0))
        return out

    return family
