"""Fourier coefficients of weight-2 newforms given as eta quotients.

The q-expansion is produced exactly in integers: each eta factor is expanded
through Euler's pentagonal-number series, factors with the same dilation are
multiplied sparsely, and factors with different dilations are combined
residue class by residue class with FFT convolutions whose output is checked
to round cleanly to integers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .arith import factorint, is_squarefree, smallest_prime_factor, tau_table

CACHE_MAGIC = b"NSC1"
_HEADER = struct.Struct("<4sIIQ")
# exact integer range of float64 FFT output we are willing to round
_FFT_SAFE = 2.0**50


@dataclass(frozen=True)
class FormDescriptor:
    level: int
    eta: tuple[tuple[int, int], ...]
    weight: int = 2
    label: str = ""

    def __post_init__(self) -> None:
        if self.weight != 2:
            raise ValueError("only weight 2 is supported")
        if self.level < 1 or self.level % 2 == 0 or not is_squarefree(self.level):
            raise ValueError(f"level must be odd and squarefree, got {self.level}")
        if sum(r for _, r in self.eta) != 2 * self.weight:
            raise ValueError("eta quotient must have total exponent 4 (weight 2)")
        if any(r < 0 or m < 1 for m, r in self.eta):
            raise ValueError("only products of eta(mz)^r with r >= 0 are supported")
        lcm = math.lcm(*(m for m, _ in self.eta))
        if lcm % self.level and self.level % lcm:
            raise ValueError("eta dilations incompatible with the stated level")
        if self.q_order * 24 != sum(m * r for m, r in self.eta):
            raise ValueError("eta quotient must start at an integral power of q")

    @property
    def q_order(self) -> int:
        return sum(m * r for m, r in self.eta) // 24


LEVEL_11 = FormDescriptor(level=11, eta=((1, 2), (11, 2)), label="11a")
LEVEL_15 = FormDescriptor(level=15, eta=((1, 1), (3, 1), (5, 1), (15, 1)), label="15a")
BUILTIN_FORMS = {11: LEVEL_11, 15: LEVEL_15}


def form_for_level(level: int) -> FormDescriptor:
    try:
        return BUILTIN_FORMS[level]
    except KeyError:
        raise ValueError(f"no built-in form of level {level}; known: {sorted(BUILTIN_FORMS)}")


@dataclass(frozen=True)
class CoefficientTable:
    descriptor: FormDescriptor
    entries: np.ndarray = field(repr=False)  # entries[n] = a_n, entries[0] = 0

    def __post_init__(self) -> None:
        self.entries.setflags(write=False)

    @property
    def length(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def level(self) -> int:
        return self.descriptor.level

    def a(self, n: int) -> int:
        self._check(n)
        return int(self.entries[n])

    def lam(self, n: int) -> float:
        """Normalized Hecke eigenvalue a_n / sqrt(n)."""
        self._check(n)
        return float(self.entries[n]) / math.sqrt(n)

    def lambdas(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if n.size and (n.min() < 1 or n.max() > self.length):
            raise IndexError(f"index outside 1..{self.length}")
        return self.entries[n] / np.sqrt(n)

    def _check(self, n: int) -> None:
        if not 1 <= n <= self.length:
            raise IndexError(f"index {n} outside 1..{self.length}")


def pentagonal_series(length: int) -> np.ndarray:
    """Coefficients of prod_{n>=1} (1 - q^n) up to q^(length-1)."""
    out = np.zeros(length, dtype=np.int64)
    k = 0
    while True:
        g1 = k * (3 * k - 1) // 2
        if g1 >= length:
            break
        sign = -1 if k % 2 else 1
        out[g1] = sign
        g2 = k * (3 * k + 1) // 2
        if k and g2 < length:
            out[g2] = sign
        k += 1
    return out


def _mul_sparse(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.int64)
    ia = np.flatnonzero(a)
    ib = np.flatnonzero(b)
    vb = b[ib]
    for i in ia:
        if i >= length:
            break
        keep = ib < length - i
        out[i + ib[keep]] += a[i] * vb[keep]
    return out


def _mul_fft(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    a = a[:length]
    b = b[:length]
    if a.size == 0 or b.size == 0:
        return np.zeros(length, dtype=np.int64)
    bound = float(np.abs(a).sum()) * float(np.abs(b).max())
    if bound > _FFT_SAFE:
        raise OverflowError("coefficient growth exceeds the exact FFT range")
    size = 1 << (a.size + b.size - 1).bit_length()
    prod = np.fft.irfft(np.fft.rfft(a.astype(np.float64), size) * np.fft.rfft(b.astype(np.float64), size), size)
    prod = prod[:length]
    rounded = np.rint(prod)
    gap = float(np.abs(prod - rounded).max()) if prod.size else 0.0
    if gap > 0.1:
        raise OverflowError(f"FFT product failed to round to integers (gap {gap:.3g})")
    out = np.zeros(length, dtype=np.int64)
    out[: rounded.size] = rounded.astype(np.int64)
    return out


def _mul(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    nnz = min(np.count_nonzero(a), np.count_nonzero(b))
    if nnz * 4 < math.isqrt(length) + 64 or max(a.size, b.size) < 512:
        return _mul_sparse(a, b, length)
    return _mul_fft(a, b, length)


def _mul_dilated(s: np.ndarray, t: np.ndarray, m: int, length: int) -> np.ndarray:
    """Truncated product s(q) * t(q^m)."""
    out = np.zeros(length, dtype=np.int64)
    for r in range(min(m, length)):
        part = s[r:length:m]
        out[r:length:m] = _mul(part, t, part.size)
    return out


def expand_eta_quotient(descriptor: FormDescriptor, M: int) -> CoefficientTable:
    """Exact a_1..a_M of the eta quotient described by `descriptor`."""
    if M < 1:
        raise ValueError("M must be positive")
    if M > 10**9:
        raise OverflowError("M beyond the 64-bit safe range of the generator")
    offset = descriptor.q_order
    length = M - offset + 1  # product coefficients of q^0 .. q^(M - offset)
    by_dilation: dict[int, int] = {}
    for m, r in descriptor.eta:
        by_dilation[m] = by_dilation.get(m, 0) + r
    series = None
    for m in sorted(by_dilation):
        r = by_dilation[m]
        if r == 0:
            continue
        sub_len = max((length - 1) // m + 1, 1)
        base = pentagonal_series(sub_len)
        power = np.zeros(sub_len, dtype=np.int64)
        power[0] = 1
        for _ in range(r):
            power = _mul(power, base, sub_len)
        if series is None and m == 1:
            series = power
            continue
        if series is None:
            series = np.zeros(length, dtype=np.int64)
            series[0] = 1
        series = _mul_dilated(series, power, m, length)
    entries = np.zeros(M + 1, dtype=np.int64)
    entries[offset:] = series[: M - offset + 1]
    if entries[1] != 1:
        raise ValueError("eta quotient is not normalized (a_1 != 1)")
    return CoefficientTable(descriptor, entries)


def coefficient_table(level: int, M: int) -> CoefficientTable:
    return expand_eta_quotient(form_for_level(level), M)


@dataclass(frozen=True)
class HeckeReport:
    ok: bool
    checked: int
    violation: tuple[int, int] | None = None
    kind: str = ""

    def __bool__(self) -> bool:
        return self.ok


@numba.njit(cache=True)
def _hecke_scan(a, spf, level):
    n_max = a.shape[0] - 1
    for n in range(2, n_max + 1):
        p = spf[n]
        pk = 1
        m = n
        while m % p == 0:
            m //= p
            pk *= p
        if m > 1:
            if a[n] != a[pk] * a[m]:
                return 1, pk, m
        elif pk > p:
            prev = a[n // p]
            if level % p == 0:
                expect = a[p] * prev
            else:
                expect = a[p] * prev - p * a[n // (p * p)]
            if a[n] != expect:
                return 2, p, n // p
    return 0, 0, 0


def verify_hecke(table: CoefficientTable) -> HeckeReport:
    """Check multiplicativity and the prime-power recursion on the whole table.

    A violation is reported as the coprime pair (m, n) with a_{mn} != a_m a_n,
    or as (p, p^k) when the prime-power recursion fails at p^{k+1}.
    """
    a = table.entries
    if table.length < 1 or a[1] != 1:
        return HeckeReport(False, 0, (1, 1), "normalization")
    spf = smallest_prime_factor(table.length)
    code, x, y = _hecke_scan(a, spf, table.level)
    if code == 0:
        return HeckeReport(True, table.length)
    kind = "multiplicativity" if code == 1 else "prime-power recursion"
    return HeckeReport(False, table.length, (int(x), int(y)), kind)


def deligne_margin(table: CoefficientTable, upto: int | None = None) -> float:
    """max_n |lambda_f(n)| / tau(n); Deligne's bound says this is <= 1."""
    M = table.length if upto is None else min(upto, table.length)
    a = table.entries[1 : M + 1].astype(np.float64)
    n = np.arange(1, M + 1, dtype=np.float64)
    t = tau_table(M)[1:].astype(np.float64)
    return float(np.max(np.abs(a) / (t * np.sqrt(n))))


def deligne_holds_exactly(table: CoefficientTable) -> bool:
    a = table.entries[1:]
    n = np.arange(1, table.length + 1, dtype=np.int64)
    t = tau_table(table.length)[1:]
    return bool(np.all(a * a <= t * t * n))


def save_cache(table: CoefficientTable, path: str | Path) -> None:
    header = _HEADER.pack(CACHE_MAGIC, table.level, table.descriptor.weight, table.length)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(table.entries[1:].astype("<i8").tobytes())


def load_cache(path: str | Path, descriptor: FormDescriptor | None = None) -> CoefficientTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("cache file truncated before header end")
    magic, level, weight, M = _HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC:
        raise ValueError(f"bad cache magic {magic!r}")
    if len(raw) != _HEADER.size + 8 * M:
        raise ValueError(f"cache length mismatch: header says {M} coefficients")
    if descriptor is None:
        descriptor = form_for_level(level)
    elif descriptor.level != level or descriptor.weight != weight:
        raise ValueError("cache header does not match the requested form")
    entries = np.zeros(M + 1, dtype=np.int64)
    entries[1:] = np.frombuffer(raw, dtype="<i8", offset=_HEADER.size)
    return CoefficientTable(descriptor, entries)


def cached_table(level: int, M: int, cache_dir: str | Path | None = None) -> CoefficientTable:
    """Load a table of length >= M from cache_dir, building and saving on miss."""
    descriptor = form_for_level(level)
    if cache_dir is None:
        return expand_eta_quotient(descriptor, M)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"level{level}.nsc"
    if path.exists():
        table = load_cache(path, descriptor)
        if table.length >= M:
            return table
    table = expand_eta_quotient(descriptor, M)
    save_cache(table, path)
    return table


def prime_power_coefficient(a_p: int, p: int, k: int, level: int) -> int:
    """a_{p^k} from a_p alone."""
    if level % p == 0:
        return a_p**k
    prev, cur = 1, a_p
    if k == 0:
        return 1
    for _ in range(k - 1):
        prev, cur = cur, a_p * cur - p * prev
    return cur


def coefficient_from_primes(n: int, a_of_prime, level: int) -> int:
    """a_n assembled multiplicatively from a callable giving a_p."""
    out = 1
    for p, k in factorint(n).items():
        out *= prime_power_coefficient(a_of_prime(p), p, k, level)
    return out
