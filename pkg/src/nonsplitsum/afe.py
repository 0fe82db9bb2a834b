"""Central derivatives L'(1/2, f x chi) over class group families and the moment main term."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import k0, loggamma

from .arith import factorint, kronecker, smallest_prime_factor
from .coeffs import CoefficientTable, prime_power_coefficient
from .quadratic import (
    EULER_GAMMA,
    ClassGroupData,
    chi_table,
    class_group,
    dirichlet_L,
    heegner_admissible,
    r_arrays,
    representation_counts,
    unit_count,
)

LOG_2PI = math.log(2 * math.pi)
V_CONSTANT = 2 * (EULER_GAMMA + LOG_2PI)  # V(y) = -log y - V_CONSTANT + O(y log y)
ZETA2 = math.pi**2 / 6
ZETA_LOGDERIV_2 = -0.56996099309450516  # zeta'(2) / zeta(2)


# ---------------------------------------------------------------- weight V


def _log_gamma_ratio(s):
    """log of L_inf(1/2 + s) / L_inf(1/2) for the degree-4 factor Gamma_C(s + 1/2)^2."""
    return 2 * (loggamma(1 + s) - s * LOG_2PI)


def V_hat(s: complex) -> complex:
    """(2 pi)^{-2s} Gamma(1 + s)^2 / s^2."""
    return complex(np.exp(_log_gamma_ratio(s)) / (s * s))


def weight_V_contour(y: float, c: float, dps: int = 30) -> float:
    """Mellin inversion of V_hat along Re s = c (adding the residue at 0 when c < 0)."""
    import mpmath

    if y <= 0:
        raise ValueError("y must be positive")
    if c == 0:
        raise ValueError("the contour must avoid the pole at 0")
    with mpmath.workdps(dps):
        yy = mpmath.mpf(y)
        two_pi = 2 * mpmath.pi

        def integrand(t):
            s = mpmath.mpc(c, t)
            return mpmath.re(two_pi ** (-2 * s) * mpmath.gamma(1 + s) ** 2 / (s * s) * yy ** (-s))

        val = mpmath.quad(integrand, [-mpmath.inf, -20, -5, 0, 5, 20, mpmath.inf]) / mpmath.pi / 2
        if c < 0:
            val += -mpmath.log(yy) - 2 * (mpmath.euler + mpmath.log(two_pi))
        return float(val)


def weight_V(y: float) -> float:
    """V(y) by contour integration: Re s = 2 for y >= 1, Re s = -1/2 plus residue for y < 1."""
    return weight_V_contour(y, 2.0 if y >= 1 else -0.5, dps=20)


def weight_V_fast(y):
    """V(y) = 2 K_0(4 pi sqrt y), the closed form of the same Mellin integral (V_hat = (2 pi)^{-2s} Gamma(s)^2)."""
    return 2 * k0(4 * math.pi * np.sqrt(np.asarray(y, dtype=float)))


# ---------------------------------------------------------------- Rankin-Selberg coefficients


@dataclass(frozen=True)
class RankinCoefficients:
    D: int
    character: int
    level: int
    values: np.ndarray  # values[n] = a_n, n >= 1; values[0] = 0

    @property
    def length(self) -> int:
        return len(self.values) - 1


def truncation_length(D: int, level: int, tol: float = 1e-10) -> int:
    """Smallest M with tau-envelope * V(M/|ND|) / sqrt M below tol."""
    cond = abs(D) * level
    y = 0.25
    while True:
        M = max(int(cond * y), 2)
        tau_env = math.exp(1.0661 * math.log(M) / math.log(math.log(max(M, 16))))
        if tau_env * float(weight_V_fast(y)) / math.sqrt(M) < tol:
            return M
        y += 0.05


def _coprime_mask(M: int, level: int) -> np.ndarray:
    mask = np.ones(M + 1, dtype=bool)
    for p in factorint(level):
        mask[::p] = False
    return mask


def ideal_character_sums(group: ClassGroupData, M: int) -> np.ndarray:
    """B[k, n] = sum over ideals of norm n of chi_k(ideal), for n <= M."""
    w = unit_count(group.D)
    counts = np.stack([representation_counts(f, M) for f in group.classes]).astype(float) / w
    return group.characters @ counts


def rankin_coeffs_all(table: CoefficientTable, group: ClassGroupData, M: int) -> np.ndarray:
    """a_n(chi) for every character (rows) and n <= M (columns)."""
    if M > table.length:
        raise ValueError("coefficient table too short")
    B = ideal_character_sums(group, M)
    n = np.arange(1, M + 1)
    lam = np.zeros(M + 1)
    lam[1:] = table.lambdas(n)
    B = B * lam[None, :]
    B[:, 0] = 0
    chi = chi_table(group.D, M + 1)
    coprime = _coprime_mask(M, table.level)
    out = np.zeros_like(B)
    m = 1
    while m * m <= M:
        if coprime[m] and chi[m]:
            step = m * m
            kmax = M // step
            out[:, step : step * kmax + 1 : step] += chi[m] * B[:, 1 : kmax + 1]
        m += 1
    return out


def rankin_coeffs(table: CoefficientTable, group: ClassGroupData, chi_index: int, M: int) -> RankinCoefficients:
    return RankinCoefficients(group.D, chi_index, table.level, rankin_coeffs_all(table, group, M)[chi_index])


def lprime_half_all(table: CoefficientTable, group: ClassGroupData, M: int | None = None) -> np.ndarray:
    """L'(1/2, f x chi) for every character of the class group."""
    cond = abs(group.D) * table.level
    if M is None:
        M = truncation_length(group.D, table.level)
    if M > table.length:
        raise ValueError(f"coefficient table too short: need {M}, have {table.length}")
    A = rankin_coeffs_all(table, group, M)
    n = np.arange(1, M + 1)
    weights = np.zeros(M + 1)
    weights[1:] = weight_V_fast(n / cond) / np.sqrt(n)
    vals = 2 * (A @ weights)
    if np.max(np.abs(vals.imag)) > 1e-8 * max(1.0, float(np.max(np.abs(vals.real)))):
        raise ArithmeticError("central derivative has a non-negligible imaginary part")
    return vals.real


def lprime_half(table: CoefficientTable, group: ClassGroupData, chi_index: int, M: int | None = None) -> float:
    return float(lprime_half_all(table, group, M)[chi_index])


@dataclass(frozen=True)
class FamilyMoment:
    D: int
    h: int
    character_route: float
    r_route: float

    @property
    def discrepancy(self) -> float:
        return abs(self.character_route - self.r_route) / max(abs(self.r_route), 1e-300)

    @property
    def value(self) -> float:
        return self.r_route


def moment_r_route(table: CoefficientTable, D: int, M: int | None = None) -> float:
    """2 sum_{(m,N)=1} chi_D(m)/m sum_n r(n) lam(n) n^{-1/2} V(m^2 n / |ND|), r = principal ideals of norm n."""
    cond = abs(D) * table.level
    if M is None:
        M = truncation_length(D, table.level)
    if M > table.length:
        raise ValueError(f"coefficient table too short: need {M}, have {table.length}")
    r, _ = r_arrays(D, M)
    principal = r * 2 / unit_count(D)
    n = np.arange(1, M + 1)
    base = principal[1:] * table.lambdas(n) / np.sqrt(n)
    chi = chi_table(D, int(math.isqrt(M)) + 2)
    coprime = _coprime_mask(int(math.isqrt(M)) + 1, table.level)
    total = 0.0
    m = 1
    while m * m <= M:
        if coprime[m] and chi[m]:
            kmax = M // (m * m)
            total += chi[m] / m * float(np.dot(base[:kmax], weight_V_fast(m * m * n[:kmax] / cond)))
        m += 1
    return 2 * total


def family_moment(table: CoefficientTable, D: int, tolerance: float = 1e-6) -> FamilyMoment:
    if not heegner_admissible(D, table.level):
        raise ValueError(f"D={D} does not satisfy the Heegner condition for level {table.level}")
    group = class_group(D)
    char_route = float(np.mean(lprime_half_all(table, group)))
    r_route = moment_r_route(table, D)
    fm = FamilyMoment(D, group.h, char_route, r_route)
    if fm.discrepancy > tolerance:
        raise ArithmeticError(f"moment routes disagree for D={D}: {char_route} vs {r_route}")
    return fm


# ---------------------------------------------------------------- symmetric square


def square_coefficients(table: CoefficientTable, K: int) -> np.ndarray:
    """a_{k^2} for 0 <= k <= K, built multiplicatively from a_p (only p <= K is needed)."""
    spf = smallest_prime_factor(max(K, 2))
    out = np.zeros(K + 1, dtype=np.float64)
    if K >= 1:
        out[1] = 1.0
    for k in range(2, K + 1):
        p = int(spf[k])
        m, e = k, 0
        while m % p == 0:
            m //= p
            e += 1
        out[k] = out[m] * prime_power_coefficient(table.a(p), p, 2 * e, table.level)
    return out


def sym2_coefficients(table: CoefficientTable, M: int) -> np.ndarray:
    """c_n with sum c_n n^{-s} = zeta^{(N)}(2s) sum lam(n^2) n^{-s}."""
    k = np.arange(M + 1)
    lam_sq = np.zeros(M + 1)
    lam_sq[1:] = square_coefficients(table, M)[1:] / k[1:]
    coprime = _coprime_mask(M, table.level)
    out = np.zeros(M + 1)
    m = 1
    while m * m <= M:
        if coprime[m]:
            step = m * m
            kmax = M // step
            out[step : step * kmax + 1 : step] += lam_sq[1 : kmax + 1]
        m += 1
    return out


def _sym2_log_gamma(s: np.ndarray) -> np.ndarray:
    # Gamma_R(s + 1) Gamma_C(s + 1), Gamma_R(s) = pi^{-s/2} Gamma(s/2), Gamma_C(s) = 2 (2 pi)^{-s} Gamma(s)
    return (
        -(s + 1) / 2 * math.log(math.pi)
        + loggamma((s + 1) / 2)
        + math.log(2)
        - (s + 1) * LOG_2PI
        + loggamma(s + 1)
    )


def _sym2_cutoff_weights(s: float, y: np.ndarray, c: float = 1.5, T: float = 60.0, dt: float = 0.02) -> np.ndarray:
    """V_s(y) = (1/2 pi i) int_{(c)} y^{-u} gamma(s+u)/gamma(s) du/u, by the trapezoid rule in Im u."""
    t = np.arange(-T, T + dt / 2, dt)
    u = c + 1j * t
    ratio = np.exp(_sym2_log_gamma(s + u) - _sym2_log_gamma(np.array([s + 0j]))[0]) / u
    ly = np.log(y)
    vals = np.exp(-np.outer(ly, u)) @ ratio
    return (vals * dt / (2 * math.pi)).real


def sym2_L(table: CoefficientTable, s: float, X: float = 1.0, M: int = 800) -> float:
    """L(s, Sym^2 f) from its approximate functional equation (conductor N^2, root number +1)."""
    N = table.level
    c = sym2_coefficients(table, M)
    n = np.arange(1, M + 1, dtype=float)
    first = np.dot(c[1:] * n ** (-s), _sym2_cutoff_weights(s, n / (N * X)))
    lg = _sym2_log_gamma(np.array([1 - s + 0j, s + 0j]))
    factor = N ** (1 - 2 * s) * float(np.exp(lg[0] - lg[1]).real)
    second = np.dot(c[1:] * n ** (s - 1), _sym2_cutoff_weights(1 - s, n * X / N))
    return float(first + factor * second)


@dataclass(frozen=True)
class Sym2Values:
    L1: float
    log_derivative: float
    L1_alternate: float  # same quantity with a different splitting parameter
    converged: bool


def sym2_values(table: CoefficientTable, M: int = 800, tolerance: float = 1e-8) -> Sym2Values:
    """L(1, Sym^2 f) and (L'/L)(1, Sym^2 f)."""
    if M > table.length:
        raise ValueError("coefficient table too short")
    L1 = sym2_L(table, 1.0, 1.0, M)
    L1_alt = sym2_L(table, 1.0, 1.7, M)
    h = 1e-3
    f = {k: sym2_L(table, 1.0 + k * h, 1.0, M) for k in (-2, -1, 1, 2)}
    deriv = (8 * (f[1] - f[-1]) - (f[2] - f[-2])) / (12 * h)
    return Sym2Values(L1, deriv / L1, L1_alt, abs(L1 - L1_alt) <= tolerance * abs(L1))


def sym2_smoothed(table: CoefficientTable, X: float) -> float:
    """sum c_n n^{-1} exp(-n/X): converges to L(1, Sym^2 f) only like X^{-1/2}; a coarse cross-check."""
    M = min(table.length, int(40 * X))
    c = sym2_coefficients(table, M)
    n = np.arange(1, M + 1, dtype=float)
    return float(np.dot(c[1:] / n, np.exp(-n / X)))


# ---------------------------------------------------------------- main term and diagonal


@dataclass(frozen=True)
class MainTermParts:
    D: int
    level: int
    L1_restricted: float  # L^{(N)}(1, chi_D)
    logderiv_restricted: float  # L'^{(N)}/L^{(N)}(1, chi_D)
    zeta2_restricted: float
    zeta_logderiv_restricted: float
    sym2: Sym2Values

    @property
    def prefactor(self) -> float:
        return 4 * self.L1_restricted / self.zeta2_restricted * self.sym2.L1

    def bracket(self, variant: str = "derived") -> float:
        base = 0.5 * math.log(abs(self.D) * self.level) + self.logderiv_restricted + self.sym2.log_derivative
        if variant == "derived":
            return base - 2 * self.zeta_logderiv_restricted - 0.5 * V_CONSTANT
        if variant == "printed":
            return base - self.zeta_logderiv_restricted - EULER_GAMMA - LOG_2PI
        raise ValueError(f"unknown variant {variant!r}")

    def value(self, variant: str = "derived") -> float:
        return self.prefactor * self.bracket(variant)


def main_term_parts(table: CoefficientTable, D: int, sym2: Sym2Values | None = None) -> MainTermParts:
    if sym2 is None:
        sym2 = sym2_values(table)
    lv = dirichlet_L(D)
    L1 = lv.L1
    logd = lv.log_derivative
    z2 = ZETA2
    zld = ZETA_LOGDERIV_2
    for p in factorint(table.level):
        c = kronecker(D, p)
        L1 *= 1 - c / p
        if c:
            logd += c * math.log(p) / (p - c)
        z2 *= 1 - p**-2
        zld += math.log(p) / (p * p - 1)
    return MainTermParts(D, table.level, L1, logd, z2, zld, sym2)


def main_term(table: CoefficientTable, D: int, sym2: Sym2Values | None = None, variant: str = "derived") -> float:
    """Residue of the diagonal Mellin integral at s = 0."""
    return main_term_parts(table, D, sym2).value(variant)


def diagonal_term(table: CoefficientTable, D: int, m_cut: float = 50.0) -> float:
    """2 sum_{(m,N)=1} chi_D(m)/m sum_a lam(a^2)/a V(a^2 m^2 / |ND|), directly."""
    cond = abs(D) * table.level
    ymax = 10.0  # V(y) < 1e-17 beyond
    amax = int(math.isqrt(int(ymax * cond))) + 1
    sq = square_coefficients(table, amax)
    a = np.arange(1, amax + 1, dtype=float)
    lam_sq = sq[1:] / a  # lam(a^2) = a_{a^2} / a
    mmax = min(int(math.sqrt(cond) * m_cut), int(math.sqrt(ymax * cond)) + 1)
    chi = chi_table(D, mmax + 1)
    coprime = _coprime_mask(mmax, table.level)
    total = 0.0
    for m in range(1, mmax + 1):
        if not (coprime[m] and chi[m]):
            continue
        kmax = int(math.sqrt(ymax * cond) / m) + 1
        kmax = min(kmax, amax)
        if kmax < 1:
            break
        total += chi[m] / m * float(np.dot(lam_sq[:kmax] / a[:kmax], weight_V_fast(a[:kmax] ** 2 * m * m / cond)))
    return 2 * total


def diagonal_term_contour(table: CoefficientTable, D: int, c: float = 1.0, T: float = 60.0, dt: float = 0.01, M: int = 1000) -> float:
    """2 int_{(c)} L^{(N)}(2s+1, chi_D) L(2s+1, Sym^2 f) / zeta^{(N)}(4s+2) V_hat(s) |ND|^s ds/(2 pi i)."""
    cond = abs(D) * table.level
    t = np.arange(-T, T + dt / 2, dt)
    s = c + 1j * t
    w = 2 * s + 1
    n = np.arange(1, M + 1, dtype=float)
    coprime = _coprime_mask(M, table.level)[1:]
    chi = chi_table(D, M + 1)[1:] * coprime
    logn = np.log(n)
    Lchi = np.exp(-np.outer(w, logn)) @ chi
    lam_sq = square_coefficients(table, M)[1:] / n
    sym_tail = np.exp(-np.outer(w, logn)) @ lam_sq  # = L(w, Sym^2) / zeta^{(N)}(2w)
    # L(w, Sym^2)/zeta^{(N)}(2w) is exactly the lam(n^2) series
    Vh = np.exp(_log_gamma_ratio(s)) / (s * s)
    integrand = Lchi * sym_tail * Vh * np.exp(s * math.log(cond))
    return float(2 * (integrand.sum() * dt / (2 * math.pi)).real)


@dataclass(frozen=True)
class RemainderDecomposition:
    D: int
    moment: float
    diagonal: float
    main_term: float
    remainder: float
    dagger_sums: np.ndarray  # dagger_sums[m-1] = sum_n r^dagger(n) lam(n) n^{-1/2} V(m^2 n / |ND|)


def dagger_sums(table: CoefficientTable, D: int, m_values, M: int | None = None) -> np.ndarray:
    cond = abs(D) * table.level
    if M is None:
        M = truncation_length(D, table.level)
    _, dag = r_arrays(D, M)
    n = np.arange(1, M + 1)
    base = dag[1:] * table.lambdas(n) / np.sqrt(n)
    out = []
    for m in np.atleast_1d(m_values):
        out.append(float(np.dot(base, weight_V_fast(m * m * n / cond))))
    return np.array(out)


def remainder_decomposition(
    table: CoefficientTable, D: int, m_small: int = 5, sym2: Sym2Values | None = None
) -> RemainderDecomposition:
    moment = moment_r_route(table, D)
    diag = diagonal_term(table, D)
    mt = main_term(table, D, sym2)
    sums = dagger_sums(table, D, np.arange(1, m_small + 1))
    return RemainderDecomposition(D, moment, diag, mt, moment - diag, sums)
