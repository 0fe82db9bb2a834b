"""Imaginary quadratic arithmetic: forms, class groups, characters, L(1, chi_D)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import digamma, gammaln

from .arith import factorint, is_fundamental_discriminant, kronecker

EULER_GAMMA = 0.57721566490153286061


@dataclass(frozen=True)
class Discriminant:
    D: int

    def __post_init__(self) -> None:
        if self.D >= 0 or self.D % 4 not in (0, 1):
            raise ValueError(f"{self.D} is not a negative discriminant")

    @property
    def fundamental(self) -> bool:
        return is_fundamental_discriminant(self.D)


def unit_count(D: int) -> int:
    return {-3: 6, -4: 4}.get(D, 2)


def chi(D: int, n: int) -> int:
    """chi_D(n) = (D/n), the Kronecker symbol."""
    return kronecker(D, n)


def chi_table(D: int, length: int) -> np.ndarray:
    """chi_D(n) for 0 <= n < length, using periodicity mod |D| on n >= 1."""
    k = abs(D)
    period = np.array([kronecker(D, a) for a in range(k)], dtype=np.int64)
    out = np.resize(period, length)
    return out


@dataclass(frozen=True, order=True)
class FormClass:
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True

    def reduced(self) -> "FormClass":
        a, b, c = self.a, self.b, self.c
        while True:
            if a > c or (a == c and b < 0):
                a, b, c = c, -b, a
                continue
            if not -a < b <= a:
                # translate b into (-a, a]
                k = (a - b) // (2 * a)
                b2 = b + 2 * a * k
                c = (b2 * b2 - (b * b - 4 * a * c)) // (4 * a)
                b = b2
                continue
            break
        if a == c and b < 0:
            b = -b
        return FormClass(a, b, c)

    def inverse(self) -> "FormClass":
        return FormClass(self.a, -self.b, self.c).reduced()

    def heegner_tau(self) -> complex:
        return complex(-self.b / (2 * self.a), math.sqrt(-self.discriminant) / (2 * self.a))

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y


def principal_form(D: int) -> FormClass:
    return FormClass(1, D % 2, (D % 2 - D) // 4)


def reduced_forms(D: int) -> list[FormClass]:
    """Primitive reduced forms of discriminant D, principal form first."""
    out = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            if (b * b - D) % (4 * a):
                continue
            c = (b * b - D) // (4 * a)
            if c < a or math.gcd(math.gcd(a, b), c) != 1:
                continue
            f = FormClass(a, b, c)
            if f.is_reduced():
                out.append(f)
        a += 1
    out.sort(key=lambda f: (f.a, -f.b))
    return out


def _ext_gcd3(x: int, y: int, z: int) -> tuple[int, int, int, int]:
    """(g, u, v, w) with u x + v y + w z = g = gcd(x, y, z)."""
    g1, u1, v1 = _ext_gcd(x, y)
    g, s, w = _ext_gcd(g1, z)
    return g, s * u1, s * v1, w


def _ext_gcd(x: int, y: int) -> tuple[int, int, int]:
    old_r, r = x, y
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def compose(f: FormClass, g: FormClass) -> FormClass:
    """Gauss composition (Dirichlet's united forms), reduced."""
    D = f.discriminant
    if g.discriminant != D:
        raise ValueError("forms of different discriminants")
    a1, b1, _ = f.a, f.b, f.c
    a2, b2, _ = g.a, g.b, g.c
    e, u, v, w = _ext_gcd3(a1, a2, (b1 + b2) // 2)
    a3 = a1 * a2 // (e * e)
    B = (u * a1 * b2 + v * a2 * b1 + w * (b1 * b2 + D) // 2) // e
    B %= 2 * a3
    if (B * B - D) % (4 * a3):
        raise ArithmeticError("composition produced an inconsistent middle coefficient")
    return FormClass(a3, B, (B * B - D) // (4 * a3)).reduced()


@dataclass(frozen=True)
class ClassGroupData:
    D: int
    classes: tuple[FormClass, ...]
    table: np.ndarray = field(repr=False)  # table[i, j] = index of classes[i] * classes[j]
    generators: tuple[int, ...]
    orders: tuple[int, ...]
    exponents: np.ndarray = field(repr=False)  # exponents[i] = coordinates of class i in the basis
    characters: np.ndarray = field(repr=False)  # characters[k, i] = chi_k(class i)

    @property
    def h(self) -> int:
        return len(self.classes)

    def index(self, f: FormClass) -> int:
        return self.classes.index(f.reduced())

    def character_labels(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in row) for row in _label_grid(self.orders)]

    def to_json(self) -> dict:
        return {
            "D": self.D,
            "h": self.h,
            "classes": [[f.a, f.b, f.c] for f in self.classes],
            "generators": list(self.generators),
            "orders": list(self.orders),
        }


def _label_grid(orders: tuple[int, ...]) -> np.ndarray:
    if not orders:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*[np.arange(n) for n in orders], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def class_group(D: int) -> ClassGroupData:
    if not is_fundamental_discriminant(D) or D >= 0:
        raise ValueError(f"{D} is not a negative fundamental discriminant")
    return _class_group(D)


@lru_cache(maxsize=256)
def _class_group(D: int) -> ClassGroupData:
    classes = reduced_forms(D)
    h = len(classes)
    position = {f: i for i, f in enumerate(classes)}
    table = np.zeros((h, h), dtype=np.int64)
    for i, f in enumerate(classes):
        for j in range(i, h):
            k = position[compose(f, classes[j])]
            table[i, j] = table[j, i] = k
    generators, orders, coords = _decompose(table)
    labels = _label_grid(tuple(orders))
    if orders:
        phase = (labels[:, None, :] * coords[None, :, :] / np.array(orders)[None, None, :]).sum(axis=2)
    else:
        phase = np.zeros((1, h))
    characters = np.exp(2j * np.pi * phase)
    return ClassGroupData(D, tuple(classes), table, tuple(generators), tuple(orders), coords, characters)


def _decompose(table: np.ndarray) -> tuple[list[int], list[int], np.ndarray]:
    """Direct-product basis of a finite abelian group given by its Cayley table.

    At each step the element of largest order modulo the current subgroup is
    adjoined after correcting it to have exactly that order.
    """
    h = table.shape[0]

    def power(x: int, k: int) -> int:
        y = 0
        for _ in range(k):
            y = table[y, x]
        return y

    members: dict[int, tuple[int, ...]] = {0: ()}
    generators: list[int] = []
    orders: list[int] = []
    while len(members) < h:
        best, best_k = -1, 0
        for x in range(h):
            if x in members:
                continue
            y, k = x, 1
            while y not in members:
                y = table[y, x]
                k += 1
            if k > best_k:
                best, best_k = x, k
        target = members[power(best, best_k)]
        if any(j % best_k for j in target):
            raise ArithmeticError("basis correction failed; Cayley table is not abelian")
        x = best
        for g, n, j in zip(generators, orders, target):
            x = table[x, power(g, (-(j // best_k)) % n)]
        new_members: dict[int, tuple[int, ...]] = {}
        for elem, vec in members.items():
            y = elem
            for t in range(best_k):
                new_members[y] = vec + (t,)
                y = table[y, x]
        members = new_members
        generators.append(x)
        orders.append(best_k)
    coords = np.zeros((h, len(orders)), dtype=np.int64)
    for elem, vec in members.items():
        coords[elem] = vec
    return generators, orders, coords


def class_number(D: int) -> int:
    return len(reduced_forms(D))


def representation_counts(form: FormClass, M: int) -> np.ndarray:
    """#{(x, y) in Z^2 : form(x, y) = k} for 0 <= k <= M."""
    a, b, c = form.a, form.b, form.c
    D = form.discriminant
    out = np.zeros(M + 1, dtype=np.int64)
    ymax = math.isqrt(4 * a * M // (-D)) + 1
    for y in range(-ymax, ymax + 1):
        # a x^2 + b y x + c y^2 <= M
        disc = (b * y) ** 2 - 4 * a * (c * y * y - M)
        if disc < 0:
            continue
        r = math.isqrt(disc)
        lo = (-b * y - r) // (2 * a) - 1
        hi = (-b * y + r) // (2 * a) + 1
        x = np.arange(lo, hi + 1, dtype=np.int64)
        vals = a * x * x + b * y * x + c * y * y
        vals = vals[vals <= M]
        out += np.bincount(vals, minlength=M + 1)[: M + 1]
    return out


def r_counts(D: int, e: int, n: int) -> tuple[int, int]:
    """(r_D(n), r_D^dagger(n)) with D replaced by D e^2.

    2 r(n) = #{(a, b) in Z^2 : a^2 - b^2 D e^2 = 4n};
    r^dagger(n) = #{(a, b) in Z x Z_{>=1} : a^2 - b^2 D e^2 = 4n}.
    """
    if n < 1:
        raise ValueError("n must be positive")
    De2 = -D * e * e
    total = 0
    dagger = 0
    b = 0
    while b * b * De2 <= 4 * n:
        rest = 4 * n - b * b * De2
        s = math.isqrt(rest)
        if s * s == rest:
            cnt = 1 if s == 0 else 2
            total += cnt if b == 0 else 2 * cnt
            if b > 0:
                dagger += cnt
        b += 1
    return total // 2, dagger


def r_arrays(D: int, M: int, e: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (r_D(n), r_D^dagger(n)) for 0 <= n <= M."""
    De2 = -D * e * e
    pairs = np.zeros(M + 1, dtype=np.int64)
    dagger = np.zeros(M + 1, dtype=np.int64)
    amax = math.isqrt(4 * M)
    a = np.arange(-amax, amax + 1, dtype=np.int64)
    b = 0
    while b * b * De2 <= 4 * M:
        v = a * a + b * b * De2
        ok = (v % 4 == 0) & (v <= 4 * M)
        n = v[ok] // 4
        cnt = np.bincount(n, minlength=M + 1)[: M + 1]
        if b == 0:
            pairs += cnt
        else:
            pairs += 2 * cnt
            dagger += cnt
        b += 1
    return pairs // 2, dagger


def heegner_admissible(D: int, level: int) -> bool:
    """Every prime dividing the level splits in Q(sqrt D)."""
    return all(kronecker(D, p) == 1 for p in factorint(level))


def has_large_prime_factors(D: int, eps: float) -> bool:
    """All prime factors of D exceed |D|^eps (the standing hypothesis on D)."""
    bound = abs(D) ** eps
    return all(p > bound for p in factorint(abs(D)))


@dataclass(frozen=True)
class DirichletLValues:
    D: int
    h: int
    L1: float  # class number formula
    L1_hurwitz: float
    Lprime1: float
    log_derivative: float  # L'/L(1, chi_D)

    @property
    def half_log(self) -> float:
        return 0.5 * math.log(abs(self.D))

    @property
    def calL(self) -> float:
        """1/2 log|D| + L'/L(1, chi_D)."""
        return self.half_log + self.log_derivative


def _chi_period(D: int) -> tuple[np.ndarray, np.ndarray]:
    k = abs(D)
    a = np.arange(1, k + 1, dtype=np.int64)
    values = np.array([kronecker(D, int(x)) for x in a], dtype=np.float64)
    return a, values


def dirichlet_L(D: int, tolerance: float = 1e-8) -> DirichletLValues:
    """L(1, chi_D), L'(1, chi_D) and the combination 1/2 log|D| + L'/L(1, chi_D).

    L(1) is computed from the class number formula and from the Hurwitz
    representation sum_a chi(a) zeta(s, a/k) / k^s at s = 1 (a digamma sum).
    The log-derivative comes from the same representation at s = 0, where
    d/ds zeta(s, x) = log Gamma(x) - log(2 pi)/2, transported to s = 1 by the
    functional equation of the odd primitive character chi_D.
    """
    if not is_fundamental_discriminant(D) or D >= 0:
        raise ValueError(f"{D} is not a negative fundamental discriminant")
    k = abs(D)
    h = class_number(D)
    w = unit_count(D)
    L1 = 2 * math.pi * h / (w * math.sqrt(k))
    a, x = _chi_period(D)
    L1_h = -float(np.dot(x, digamma(a / k))) / k
    if abs(L1 - L1_h) > tolerance * max(1.0, L1):
        raise ArithmeticError(f"L(1, chi_{D}) routes disagree: {L1} vs {L1_h}")
    L0 = -float(np.dot(x, a)) / k
    dL0 = -math.log(k) * L0 + float(np.dot(x, gammaln(a / k)))
    log_deriv = _log_derivative_from_zero(k, L0, dL0)
    return DirichletLValues(D, h, L1, L1_h, L1 * log_deriv, log_deriv)


def _log_derivative_from_zero(k: int, L0: float, dL0: float) -> float:
    # completed L-function (k/pi)^{(s+1)/2} Gamma((s+1)/2) L(s) is symmetric under s -> 1 - s
    psi_half = -EULER_GAMMA - 2 * math.log(2)
    psi_one = -EULER_GAMMA
    return -math.log(k / math.pi) - 0.5 * psi_half - 0.5 * psi_one - dL0 / L0


def lprime_one_stieltjes(D: int, dps: int = 20) -> float:
    """L'(1, chi_D) through the Laurent expansion of Hurwitz zeta at s = 1.

    d/ds [k^-s sum chi(a) zeta(s, a/k)] at s = 1 equals
    -log k * L(1) - (1/k) sum chi(a) gamma_1(a/k) with gamma_1 the first
    generalized Stieltjes constant. Slow; meant as an independent check.
    """
    import mpmath

    k = abs(D)
    with mpmath.workdps(dps):
        L1 = mpmath.mpf(0)
        S1 = mpmath.mpf(0)
        for a in range(1, k + 1):
            c = kronecker(D, a)
            if c:
                x = mpmath.mpf(a) / k
                L1 -= c * mpmath.digamma(x)
                S1 += c * mpmath.stieltjes(1, x)
        L1 /= k
        return float(-mpmath.log(k) * L1 - S1 / k)
