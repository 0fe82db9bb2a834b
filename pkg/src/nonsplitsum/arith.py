"""Elementary integer arithmetic shared by the other modules."""

from __future__ import annotations

import math
from functools import lru_cache

import numba
import numpy as np
from sympy import factorint as _sympy_factorint


def factorint(n: int) -> dict[int, int]:
    if n < 1:
        raise ValueError(f"factorint expects a positive integer, got {n}")
    return {int(p): int(k) for p, k in _sympy_factorint(n).items()}


def is_squarefree(n: int) -> bool:
    return all(k == 1 for k in factorint(abs(n)).values()) if n else False


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, k in factorint(n).items():
        divs = [d * p**j for d in divs for j in range(k + 1)]
    return sorted(divs)


def mobius(n: int) -> int:
    f = factorint(n)
    if any(k > 1 for k in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def euler_phi(n: int) -> int:
    out = n
    for p in factorint(n):
        out -= out // p
    return out


def inverse_mod(a: int, q: int) -> int:
    """Inverse of a modulo q via extended Euclid; raises when gcd(a, q) != 1."""
    if q == 1:
        return 0
    return pow(a % q, -1, q)


def tau(n: int) -> int:
    return math.prod(k + 1 for k in factorint(n).values())


@lru_cache(maxsize=None)
def _primes_below(limit: int) -> np.ndarray:
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


def primes_up_to(limit: int) -> np.ndarray:
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    return _primes_below(int(limit))


def smallest_prime_factor(limit: int) -> np.ndarray:
    """spf[n] for 0 <= n <= limit (spf[0] = spf[1] = 0)."""
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in primes_up_to(math.isqrt(limit)):
        block = spf[p * p :: p]
        block[block == 0] = p
        if spf[p] == 0:
            spf[p] = p
    rest = np.flatnonzero(spf == 0)
    rest = rest[rest >= 2]
    spf[rest] = rest
    return spf


@numba.njit(cache=True)
def _tau_from_spf(spf):
    n_max = spf.shape[0] - 1
    out = np.zeros(n_max + 1, dtype=np.int64)
    if n_max >= 1:
        out[1] = 1
    for n in range(2, n_max + 1):
        p = spf[n]
        m = n
        k = 0
        while m % p == 0:
            m //= p
            k += 1
        out[n] = out[m] * (k + 1)
    return out


def tau_table(limit: int) -> np.ndarray:
    """Divisor counts tau(n) for 0 <= n <= limit."""
    return _tau_from_spf(smallest_prime_factor(limit))


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n) for arbitrary integers a, n."""
    if n == 0:
        return 1 if abs(a) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 and a % 8 in (3, 5):
            result = -result
    # Jacobi symbol (a/n) for odd n > 0
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> tuple[int, int]:
    """Combine x = r1 (m1), x = r2 (m2) for coprime moduli."""
    t = ((r2 - r1) * inverse_mod(m1, m2)) % m2
    return r1 + m1 * t, m1 * m2


def sqrt_mod_prime_power(a: int, p: int, k: int) -> list[int]:
    """All x mod p^k with x^2 = a (mod p^k)."""
    mod = p**k
    a %= mod
    if p == 2 or mod <= 64:
        return [x for x in range(mod) if (x * x - a) % mod == 0]
    if a % p == 0:
        # rare at the scales used here; fall back to enumeration
        return [x for x in range(mod) if (x * x - a) % mod == 0]
    roots = [x for x in _sqrt_mod_prime(a % p, p)]
    pk = p
    for _ in range(1, k):
        lifted = []
        nxt = pk * p
        for x in roots:
            # Hensel: x' = x - (x^2 - a) / (2x) mod p^{j+1}
            fx = (x * x - a) % nxt
            x_new = (x - fx * inverse_mod(2 * x, nxt)) % nxt
            lifted.append(x_new)
        roots = lifted
        pk = nxt
    return sorted(set(roots))


def _sqrt_mod_prime(a: int, p: int) -> list[int]:
    a %= p
    if a == 0:
        return [0]
    if pow(a, (p - 1) // 2, p) != 1:
        return []
    # Tonelli-Shanks
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return sorted({r, p - r})


def is_fundamental_discriminant(D: int) -> bool:
    if D in (0, 1):
        return False
    if D % 4 == 1:
        return is_squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and is_squarefree(m)
    return False


def fundamental_discriminants(dmin: int, dmax: int) -> list[int]:
    """Negative fundamental discriminants D with dmin <= D <= dmax (both negative)."""
    lo, hi = min(dmin, dmax), max(dmin, dmax)
    return [D for D in range(hi, lo - 1, -1) if D < 0 and is_fundamental_discriminant(D)]
