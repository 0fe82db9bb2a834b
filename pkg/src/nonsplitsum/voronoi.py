"""Bessel kernels, Voronoi summation and the Poisson coefficients h(m; l; q)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .arith import factorint, inverse_mod
from .coeffs import CoefficientTable
from .deltasym import DeltaKernel, bump, delta_q
from .expsums import kloosterman_table

SERIES_LIMIT = 8.0
ASYMPTOTIC_LIMIT = 25.0


@numba.njit(cache=True)
def _j1_scalar(x):
    ax = abs(x)
    if ax < SERIES_LIMIT:
        # sum (-1)^k (x/2)^{2k+1} / (k! (k+1)!)
        half = 0.5 * ax
        term = half
        total = term
        h2 = half * half
        k = 0
        while abs(term) > 1e-18 * abs(total) + 1e-300:
            k += 1
            term *= -h2 / (k * (k + 1))
            total += term
        out = total
    elif ax < ASYMPTOTIC_LIMIT:
        # Bessel's integral, trapezoid rule on a full period (geometric convergence)
        n = 64
        total = 0.0
        for j in range(n):
            th = 2.0 * math.pi * j / n
            total += math.cos(th - ax * math.sin(th))
        out = total / n
    else:
        # Hankel expansion with mu = 4
        mu = 4.0
        z8 = 8.0 * ax
        p = 1.0
        q = 0.0
        term = 1.0
        k = 1
        prev = 1e300
        while True:
            term *= (mu - (2 * k - 1) ** 2) / (k * z8)
            if abs(term) > prev or abs(term) < 1e-17:
                break
            prev = abs(term)
            if k % 2 == 1:
                q += term if (k // 2) % 2 == 0 else -term
            else:
                p += -term if (k // 2) % 2 == 1 else term
            k += 1
        chi = ax - 0.75 * math.pi
        out = math.sqrt(2.0 / (math.pi * ax)) * (p * math.cos(chi) - q * math.sin(chi))
    return out if x >= 0 else -out


@numba.vectorize(["float64(float64)"], cache=True)
def _j1_vec(x):
    return _j1_scalar(x)


def bessel_j1(x):
    """J_1(x): power series for small x, Bessel's integral in the middle, Hankel asymptotics beyond."""
    out = _j1_vec(np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LevelSplit:
    level: int
    q: int

    @property
    def N1(self) -> int:
        return math.gcd(self.q, self.level)

    @property
    def N2(self) -> int:
        return self.level // self.N1


def eta_sign(table: CoefficientTable, N2: int) -> float:
    """Unit constant of the Voronoi formula: prod over p | N2 of -a_p (the Atkin-Lehner sign at p)."""
    out = 1.0
    if N2 > 1:
        for p in factorint(N2):
            out *= -table.a(p)
    return out


def _nodes(lo: float, hi: float, spacing: float) -> tuple[np.ndarray, float]:
    n = max(int(math.ceil((hi - lo) / spacing)), 8)
    x = np.linspace(lo, hi, n + 1)
    return x, (hi - lo) / n


def bessel_transform(
    g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    m: np.ndarray,
    q: int,
    N2: int,
    feature: float,
    points_per_wave: float = 10.0,
    points_per_feature: float = 160.0,
    block: int = 1 << 22,
) -> np.ndarray:
    """int_lo^hi g(x) J_1(4 pi sqrt(x m) / (q sqrt N2)) dx for each m.

    g must be smooth and vanish to all orders at lo and hi, so the trapezoid
    rule on a uniform grid converges faster than any power of the spacing.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    if hi <= lo or len(m) == 0:
        return np.zeros(len(m))
    mmax = float(m.max())
    wave = q * math.sqrt(N2 * max(lo, 1.0) / mmax) if mmax > 0 else math.inf
    spacing = min(wave / points_per_wave, feature / points_per_feature)
    x, w = _nodes(lo, hi, spacing)
    gx = g(x)
    keep = gx != 0
    x, gx = x[keep], gx[keep] * w
    if len(x) == 0:
        return np.zeros(len(m))
    c = 4 * math.pi / (q * math.sqrt(N2))
    sx = np.sqrt(x)
    out = np.empty(len(m))
    step = max(1, block // len(x))
    for s in range(0, len(m), step):
        ms = np.sqrt(m[s : s + step])
        out[s : s + step] = bessel_j1(c * ms[:, None] * sx[None, :]) @ gx
    return out


def bessel_transform_trapezoid(g, lo: float, hi: float, m: float, q: int, N2: int, points: int) -> float:
    """Single-m oracle on an explicit uniform grid, using scipy's J_1."""
    from scipy.special import j1

    x = np.linspace(lo, hi, points + 1)
    w = (hi - lo) / points
    return float(np.sum(g(x) * j1(4 * math.pi * np.sqrt(x * m) / (q * math.sqrt(N2)))) * w)


def delta_window(kernel: DeltaKernel, h: float, q: int) -> Callable[[np.ndarray], np.ndarray]:
    """x -> Delta_q phi(x - h)."""

    def g(x):
        u = np.asarray(x, dtype=float) - h
        return np.atleast_1d(delta_q(kernel, q, u)) * kernel.phi(u)

    return g


def gtilde(kernel: DeltaKernel, m, h: float, q: int, split: LevelSplit, **kw) -> np.ndarray | float:
    """int_0^inf Delta_q phi(x - h) J_1(4 pi sqrt(x m) / (q sqrt N2)) dx."""
    if kernel.U > h / 2:
        raise ValueError("need U <= h/2")
    scalar = np.ndim(m) == 0
    m_arr = np.atleast_1d(np.asarray(m, dtype=float))
    if q >= kernel.q_cutoff:
        out = np.zeros(len(m_arr))
    else:
        feature = min(kernel.U, q * kernel.Omega)
        out = bessel_transform(
            delta_window(kernel, h, q), h - kernel.U, h + kernel.U, m_arr, q, split.N2, feature, **kw
        )
    return float(out[0]) if scalar else out


def gtilde_matrix(
    kernel: DeltaKernel,
    m: np.ndarray,
    h: np.ndarray,
    q: int,
    N2: int,
    points_per_wave: float = 6.0,
    points_per_feature: float = 50.0,
    block_bytes: int = 1 << 27,
) -> np.ndarray:
    """g~(m_i; h_j; q) for all pairs, sharing one Bessel matrix across the shifts h_j.

    All kernels Delta_q phi(x - h_j) are sampled on a single uniform grid that
    covers every support, so J_1 is evaluated once per (m, node) and the h-dependence
    reduces to a matrix product.
    """
    m = np.asarray(m, dtype=float)
    h = np.asarray(h, dtype=float)
    out = np.zeros((len(m), len(h)))
    if q >= kernel.q_cutoff or len(m) == 0 or len(h) == 0:
        return out
    if kernel.U > h.min() / 2:
        raise ValueError("need U <= h/2")
    lo, hi = h.min() - kernel.U, h.max() + kernel.U
    wave = q * math.sqrt(N2 * lo / m.max())
    feature = min(kernel.U, q * kernel.Omega)
    x, w = _nodes(lo, hi, min(wave / points_per_wave, feature / points_per_feature))
    G = np.empty((len(x), len(h)))
    for j, hj in enumerate(h):
        u = x - hj
        inside = np.abs(u) < kernel.U
        col = np.zeros(len(x))
        if inside.any():
            col[inside] = np.atleast_1d(delta_q(kernel, q, u[inside])) * kernel.phi(u[inside])
        G[:, j] = col * w
    rows = np.flatnonzero(np.any(G != 0, axis=1))
    x, G = x[rows], G[rows]
    c = 4 * math.pi / (q * math.sqrt(N2))
    sx = np.sqrt(x)
    step = max(1, block_bytes // (8 * max(len(x), 1)))
    for s0 in range(0, len(m), step):
        ms = np.sqrt(m[s0 : s0 + step])
        out[s0 : s0 + step] = bessel_j1(c * ms[:, None] * sx[None, :]) @ G
    return out


HANKEL_TERMS = 5
HANKEL_MIN_ARGUMENT = 300.0


def _hankel_coefficients(terms: int) -> np.ndarray:
    """a_j(1) of the large-argument expansion P + iQ = sum_j i^j a_j / z^j for J_1."""
    a = np.empty(terms)
    a[0] = 1.0
    for j in range(1, terms):
        a[j] = a[j - 1] * (4.0 - (2 * j - 1) ** 2) / (j * 8.0)
    return a


def gtilde_mixed(
    kernel: DeltaKernel,
    m: np.ndarray,
    h: np.ndarray,
    mix: np.ndarray,
    q: int,
    N2: int,
    points_per_wave: float = 6.0,
    points_per_feature: float = 80.0,
    block_bytes: int = 1 << 27,
) -> np.ndarray:
    """gtilde_matrix(kernel, m, h, q, N2) @ mix, fast for long runs of m.

    Rows whose Bessel argument stays below HANKEL_MIN_ARGUMENT go through
    gtilde_matrix. The rest use the Hankel expansion of J_1 on a uniform grid in
    t = sqrt(x), where the phase is linear in t: the exponentials factor as an
    outer product and the sum over nodes is a matrix product.
    """
    m = np.asarray(m, dtype=float)
    h = np.asarray(h, dtype=float)
    mix = np.asarray(mix, dtype=float).reshape(len(h), -1)
    out = np.zeros((len(m), mix.shape[1]))
    if q >= kernel.q_cutoff or len(m) == 0 or len(h) == 0:
        return out
    if kernel.U > h.min() / 2:
        raise ValueError("need U <= h/2")
    c = 4 * math.pi / (q * math.sqrt(N2))
    t_lo, t_hi = math.sqrt(h.min() - kernel.U), math.sqrt(h.max() + kernel.U)
    small = c * np.sqrt(m) * t_lo < HANKEL_MIN_ARGUMENT
    if small.any():
        out[small] = gtilde_matrix(kernel, m[small], h, q, N2, points_per_feature=4 * points_per_feature) @ mix
    big = np.flatnonzero(~small)
    if len(big) == 0:
        return out

    omega_max = c * math.sqrt(m[big].max())
    feature = min(kernel.U, q * kernel.Omega) / (2 * t_hi)
    t, dt = _nodes(t_lo, t_hi, min(2 * math.pi / (omega_max * points_per_wave), feature / points_per_feature))
    x = t * t
    G = np.zeros((len(t), len(h)))
    for j, hj in enumerate(h):
        u = x - hj
        inside = np.abs(u) < kernel.U
        if inside.any():
            G[inside, j] = np.atleast_1d(delta_q(kernel, q, u[inside])) * kernel.phi(u[inside])
    G = (G * (2 * t * dt)[:, None]) @ mix
    rows = np.flatnonzero(np.any(G != 0, axis=1))
    if len(rows) == 0:
        return out
    first, last = rows[0], rows[-1] + 1
    t, G = t[first:last], G[first:last]

    coeffs = _hankel_coefficients(HANKEL_TERMS)
    width = G.shape[1]
    W = np.concatenate([G * t[:, None] ** (-0.5 - j) for j in range(HANKEL_TERMS)], axis=1)
    # t_k = t_0 + (a chunk + b) dt: sum over b by a matrix product, then over a
    K = len(t)
    chunk = max(1, int(math.isqrt(K)))
    n_chunks = -(-K // chunk)
    W = np.concatenate([W, np.zeros((n_chunks * chunk - K, W.shape[1]))])
    W = W.reshape(n_chunks, chunk, -1).transpose(1, 0, 2).reshape(chunk, -1).astype(complex)
    offsets = t[0] + np.arange(n_chunks) * chunk * dt
    inner = np.arange(chunk) * dt
    step = max(1, block_bytes // (16 * n_chunks * HANKEL_TERMS * width))
    rotation = np.exp(-0.75j * math.pi)
    for s0 in range(0, len(big), step):
        idx = big[s0 : s0 + step]
        omega = c * np.sqrt(m[idx])
        partial = (np.exp(1j * omega[:, None] * inner[None, :]) @ W).reshape(len(idx), n_chunks, -1)
        F = np.einsum("ia,iak->ik", np.exp(1j * omega[:, None] * offsets[None, :]), partial)
        F = F.reshape(len(idx), HANKEL_TERMS, width)
        series = np.zeros((len(idx), width), dtype=complex)
        for j in range(HANKEL_TERMS):
            series += ((1j) ** j * coeffs[j] * omega ** (-j))[:, None] * F[:, j, :]
        out[idx] = np.sqrt(2 / (math.pi * omega))[:, None] * (rotation * series).real
    return out


@dataclass(frozen=True)
class TestFunction:
    """g(x) = bump((x - center) / width), supported on (center - width, center + width)."""

    center: float
    width: float
    scale: float = 1.0

    def __call__(self, x):
        return self.scale * bump((np.asarray(x, dtype=float) - self.center) / self.width)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.width, self.center + self.width


@dataclass(frozen=True)
class VoronoiReport:
    lhs: complex
    rhs: complex
    residual: float
    dual_length: int


def voronoi_sides(
    table: CoefficientTable,
    q: int,
    d: int,
    g: TestFunction,
    eta: float | None = None,
    tol: float = 1e-10,
    chunk: int = 512,
    max_dual: int | None = None,
) -> VoronoiReport:
    """Both sides of sum lam(n) e(nd/q) g(n) = -2 pi eta/(q sqrt N2) sum lam(m) e(-m (d N2)^-1 / q) g~(m; q).

    The dual sum is cut once a whole chunk of terms falls below tol relative
    to the running sum, past the transition length q^2 N2 X / width^2.
    """
    if math.gcd(d, q) != 1:
        raise ValueError("need gcd(d, q) = 1")
    split = LevelSplit(table.level, q)
    N2 = split.N2
    if eta is None:
        eta = eta_sign(table, N2)
    lo, hi = g.support
    lo = max(lo, 0.0)
    n = np.arange(max(1, math.floor(lo)), math.ceil(hi) + 1)
    if n[-1] > table.length:
        raise ValueError("coefficient table too short for the test function")
    a = table.lambdas(n)
    lhs = complex(np.sum(a * np.exp(2j * np.pi * ((n * d) % q) / q) * g(n)))
    dual_char = inverse_mod(d * N2, q)
    transition = q * q * N2 * hi / (g.width**2) + 10
    limit = max_dual if max_dual is not None else table.length
    rhs = 0j
    m0 = 1
    converged = False
    while m0 <= limit:
        m = np.arange(m0, min(m0 + chunk, limit + 1))
        gt = bessel_transform(g, lo, hi, m, q, N2, g.width)
        am = table.lambdas(m)
        part = am * np.exp(-2j * np.pi * ((m * dual_char) % q) / q) * gt
        rhs += part.sum()
        m0 = int(m[-1]) + 1
        if m[-1] > transition and np.max(np.abs(part)) <= tol * max(abs(rhs), 1e-300):
            converged = True
            break
    if not converged and max_dual is None:
        raise ValueError("coefficient table too short for the dual sum")
    rhs *= -2 * math.pi * eta / (q * math.sqrt(N2))
    return VoronoiReport(lhs, rhs, abs(lhs - rhs) / (1 + abs(lhs)), m0 - 1)


def voronoi_residual(table: CoefficientTable, q: int, d: int, g: TestFunction, **kw) -> float:
    return voronoi_sides(table, q, d, g, **kw).residual


def fit_eta(table: CoefficientTable, q: int, d: int, g: TestFunction, **kw) -> complex:
    """Unit constant that makes the two sides agree for one test case (fallback path)."""
    rep = voronoi_sides(table, q, d, g, eta=1.0, **kw)
    return rep.lhs / rep.rhs


@dataclass(frozen=True)
class VoronoiCase:
    level: int
    q: int
    d: int
    g: TestFunction


def voronoi_grid(tables: dict[int, CoefficientTable], cases, **kw) -> list[tuple[VoronoiCase, float]]:
    return [(c, voronoi_residual(tables[c.level], c.q, c.d, c.g, **kw)) for c in cases]


def default_voronoi_cases() -> list[VoronoiCase]:
    """Ten cases per level (11 and 15), q <= 20, three bump placements; level 15 hits every gcd(q, N)."""
    bumps = [TestFunction(1500.0, 500.0), TestFunction(3000.0, 1000.0), TestFunction(900.0, 300.0)]
    level11 = [(1, 0), (2, 1), (3, 2), (5, 2), (7, 3), (8, 5), (11, 1), (12, 7), (13, 6), (17, 5)]
    level15 = [(1, 0), (3, 1), (4, 3), (5, 2), (6, 5), (9, 4), (10, 3), (15, 4), (16, 9), (20, 3)]
    cases = [(11, q, d) for q, d in level11] + [(15, q, d) for q, d in level15]
    return [VoronoiCase(level, q, d, bumps[i % 3]) for i, (level, q, d) in enumerate(cases)]


@dataclass(frozen=True)
class PoissonCoefficient:
    m: int
    l: int
    q: int
    value: complex


def _z_nodes(N: float, spacing: float) -> tuple[np.ndarray, float]:
    return _nodes(N, 2 * N, spacing)


def gtilde_along_parabola(
    kernel: DeltaKernel, m: int, q: int, split: LevelSplit, d: int, z: np.ndarray
) -> np.ndarray:
    """g~(m; z^2 + d; q) for each z."""
    return np.array([gtilde(kernel, m, float(zz * zz + d), q, split) for zz in z])


def poisson_h(
    kernel: DeltaKernel,
    m: int,
    l,
    q: int,
    split: LevelSplit,
    window: Callable[[np.ndarray], np.ndarray],
    N: float,
    d: int,
    z_spacing: float | None = None,
) -> PoissonCoefficient | list[PoissonCoefficient]:
    """h(m; l; q) = (1/q) int g~(m; z^2 + d; q) V(z/N) e(-l z / q) dz."""
    ls = np.atleast_1d(l)
    if q >= kernel.q_cutoff:
        vals = np.zeros(len(ls), dtype=complex)
    else:
        if z_spacing is None:
            z_spacing = _default_z_spacing(kernel, m, q, split, d, N, int(np.max(np.abs(ls))))
        z, w = _z_nodes(N, z_spacing)
        gz = gtilde_along_parabola(kernel, m, q, split, d, z) * window(z / N) * w
        vals = np.array([np.sum(gz * np.exp(-2j * np.pi * ll * z / q)) for ll in ls]) / q
    out = [PoissonCoefficient(m, int(ll), q, complex(v)) for ll, v in zip(ls, vals)]
    return out[0] if np.ndim(l) == 0 else out


def _default_z_spacing(kernel, m, q, split, d, N, lmax) -> float:
    # g~(z^2 + d) moves on the Bessel wavelength and the kernel feature scale in x,
    # i.e. on those scales divided by dx/dz = 2z <= 4N
    x = N * N + d
    wave_x = q * math.sqrt(split.N2 * x / max(m, 1))
    feature_x = min(kernel.U, q * kernel.Omega)
    s = min(wave_x, feature_x) / (4 * N) / 6
    if lmax:
        s = min(s, q / lmax / 8)
    return min(s, N / 200)


def poisson_sides(
    kernel: DeltaKernel,
    m: int,
    q: int,
    split: LevelSplit,
    window,
    N: float,
    d: int,
    L: int,
) -> tuple[complex, complex]:
    """Left: sum_n S(m N2^-1, n^2 + d; q) g~(m; n^2 + d; q) V(n/N). Right: the l-expansion for |l| <= L."""
    K = kloosterman_table(q)
    a = (m * inverse_mod(split.N2, q)) % q
    n = np.arange(math.floor(N) + 1, math.ceil(2 * N))
    gt = gtilde_along_parabola(kernel, m, q, split, d, n.astype(float))
    S = K[a, (n * n + d) % q]
    left = complex(np.sum(S * gt * window(n / N)))
    ls = np.arange(-L, L + 1)
    hs = poisson_h(kernel, m, ls, q, split, window, N, d)
    r = np.arange(q)
    Sr = K[a, (r * r + d) % q]
    right = 0j
    for hc in hs:
        right += hc.value * np.sum(Sr * np.exp(2j * np.pi * hc.l * r / q))
    return left, right


def hankel_envelope(
    kernel: DeltaKernel, h: float, q: int, split: LevelSplit, A: int, ratios, window: float = 0.5, samples: int = 21
) -> np.ndarray:
    """|g~(y)| (y/h)^A min(U/q, Omega)^{2A} at y = r h / min(U/q, Omega)^2 for each r.

    |g~| is taken as its maximum over [y, (1 + window) y] so that isolated
    zeros of the oscillating transform do not masquerade as decay.
    """
    mu = min(kernel.U / q, kernel.Omega)
    out = []
    for r in np.atleast_1d(ratios):
        y = float(r) * h / mu**2
        ys = y * np.linspace(1.0, 1.0 + window, samples)
        g = float(np.max(np.abs(gtilde(kernel, ys, h, q, split))))
        out.append(g * float(r) ** A)
    return np.array(out)


@dataclass(frozen=True)
class PoissonBounds:
    D: int
    value_constant: float  # max |h| q / |D|^{1/2 + eta3}
    derivative_constant: float  # max |dh/dq| q^3 / |D|^{1 + eta3}


def poisson_bound_constants(
    kernel: DeltaKernel, level: int, window, N: float, d: int, q_values, m: int = 1, l: int = 0,
    eta3: float = 0.04, step: float = 1e-3,
) -> PoissonBounds:
    """Fitted constants in |h| << q^-1 |D|^{1/2+eta3} and |dh/dq| << q^-3 |D|^{1+eta3}."""
    c_val = 0.0
    c_der = 0.0
    for q in q_values:
        split = LevelSplit(level, int(q))
        v = poisson_h(kernel, m, l, q, split, window, N, d).value
        c_val = max(c_val, abs(v) * q / d ** (0.5 + eta3))
        up = poisson_h(kernel, m, l, q + step, split, window, N, d).value
        dn = poisson_h(kernel, m, l, q - step, split, window, N, d).value
        c_der = max(c_der, abs(up - dn) / (2 * step) * q**3 / d ** (1 + eta3))
    return PoissonBounds(d, c_val, c_der)
