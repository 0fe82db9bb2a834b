"""Sums of lambda_f(n^2 + d) over n ~ N, their cancellation exponent, and a staged trace of the circle-method argument."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .arith import crt_pair, factorint, inverse_mod, sqrt_mod_prime_power, tau_table
from .coeffs import CoefficientTable
from .deltasym import build_kernel, delta_q
from .expsums import kloosterman_table, ramanujan
from .fitting import ExponentFit, fit_exponent
from .voronoi import LevelSplit, eta_sign, gtilde_mixed, poisson_sides
from .windows import plateau_window

SHARP = "sharp"
SMOOTH = "smooth"


@dataclass(frozen=True)
class NonSplitQuery:
    d: int
    N: int
    window: str = SHARP
    delta: float = 0.1  # plateau parameter of the smooth window

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.window not in (SHARP, SMOOTH):
            raise ValueError(f"unknown window {self.window!r}")

    def n_range(self) -> np.ndarray:
        return np.arange(self.N + 1, 2 * self.N, dtype=np.int64)

    def weights(self, n: np.ndarray) -> np.ndarray:
        if self.window == SHARP:
            return np.ones(len(n))
        return np.atleast_1d(plateau_window(n / self.N, self.delta))

    @property
    def max_argument(self) -> int:
        return (2 * self.N) ** 2 + self.d


def _values(table: CoefficientTable, query: NonSplitQuery) -> tuple[np.ndarray, np.ndarray]:
    n = query.n_range()
    if len(n) == 0:
        return n, np.zeros(0)
    args = n * n + query.d
    if args[-1] > table.length:
        raise ValueError(f"coefficient table too short: need {int(args[-1])}, have {table.length}")
    return n, table.lambdas(args)


def sharp_sum(table: CoefficientTable, query: NonSplitQuery) -> float:
    """sum_{N < n < 2N} lambda_f(n^2 + d)."""
    _, lam = _values(table, query)
    return float(np.sum(lam))


def smooth_sum(table: CoefficientTable, query: NonSplitQuery) -> float:
    """sum_n lambda_f(n^2 + d) V(n / N) with V the plateau window."""
    q = query if query.window == SMOOTH else NonSplitQuery(query.d, query.N, SMOOTH, query.delta)
    n, lam = _values(table, q)
    return float(np.sum(lam * q.weights(n)))


def absolute_sum(table: CoefficientTable, query: NonSplitQuery) -> float:
    n, lam = _values(table, query)
    return float(np.sum(np.abs(lam) * query.weights(n)))


def fringe_bound(query: NonSplitQuery) -> float:
    """Deligne envelope for |sharp - smooth|: sum of tau(n^2 + d) |1 - V(n/N)| over the fringes."""
    n = query.n_range()
    if len(n) == 0:
        return 0.0
    args = n * n + query.d
    tau = tau_table(int(args[-1]))[args]
    gap = 1.0 - np.atleast_1d(plateau_window(n / query.N, query.delta))
    return float(np.sum(tau * gap))


# ---------------------------------------------------------------- exponent scan

CONTROLS = ("signed", "random_signs", "absolute", "divisor")


def prime_sampler(lo: float = 1e3, hi: float = 4e6, points: int = 12, trials: int = 3, seed: int = 0):
    """Primes d = 3 (4) near a geometric grid of targets in [lo, hi]; `trials` primes per target."""
    from sympy import nextprime

    rng = np.random.default_rng(seed)
    grid = np.geomspace(lo, hi, points)
    out = []
    for target in grid:
        group = []
        for _ in range(trials):
            d = int(nextprime(int(target * (1 + 0.2 * rng.random()))))
            while d % 4 != 3:
                d = int(nextprime(d))
            group.append(d)
        out.append(group)
    return out


@dataclass(frozen=True)
class ScanResult:
    fit: ExponentFit
    rows: list[tuple[int, int, float, float]] = field(repr=False)  # (d, N, sum, abs_sum)


def exponent_scan(
    table: CoefficientTable,
    groups: list[list[int]],
    control: str = "signed",
    seed: int = 0,
    N_rule: Callable[[int], int] = lambda d: round(math.sqrt(d)),
) -> ScanResult:
    """Fit log RMS |S(d, N)| against log N, one RMS per group of d at comparable size."""
    if control not in CONTROLS:
        raise ValueError(f"unknown control {control!r}")
    if len(groups) < 5:
        raise ValueError("need at least 5 sample groups")
    rng = np.random.default_rng(seed)
    tau = tau_table(max(NonSplitQuery(d, N_rule(d)).max_argument for g in groups for d in g)) if control == "divisor" else None
    xs, ys, rows = [], [], []
    for group in groups:
        sums = []
        Ns = []
        for d in group:
            N = N_rule(d)
            q = NonSplitQuery(d, N)
            n, lam = _values(table, q)
            if control == "signed":
                s = float(np.sum(lam))
            elif control == "random_signs":
                s = float(np.sum(rng.choice([-1.0, 1.0], size=len(n))))
            elif control == "absolute":
                s = float(np.sum(np.abs(lam)))
            else:
                s = float(np.sum(tau[n * n + d]))
            rows.append((d, N, s, float(np.sum(np.abs(lam)))))
            sums.append(s)
            Ns.append(N)
        xs.append(float(np.exp(np.mean(np.log(Ns)))))
        ys.append(math.sqrt(float(np.mean(np.square(sums)))))
    if np.ptp(np.log10(xs)) < 1:
        raise ValueError("sample must span at least two decades in d")
    return ScanResult(fit_exponent(xs, ys), rows)


# ---------------------------------------------------------------- roots of nu^2 + d = 0 (q)


def roots_mod(d: int, q: int) -> list[int]:
    """All nu mod q with nu^2 + d = 0 (mod q), via prime-power lifting and CRT."""
    if q == 1:
        return [0]
    sols, mod = [0], 1
    for p, k in factorint(q).items():
        local = sqrt_mod_prime_power(-d, p, k)
        if not local:
            return []
        pk = p**k
        sols = [crt_pair(s, mod, r, pk)[0] % (mod * pk) for s in sols for r in local]
        mod *= pk
    return sorted(sols)


def star_discrepancy(points) -> float:
    x = np.sort(np.asarray(points, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty point set")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))


@dataclass(frozen=True)
class RootsReport:
    d: int
    Qmax: int
    points: np.ndarray = field(repr=False)
    discrepancy: float


def roots_equidistribution(d: int, Qmax: int | None = None) -> RootsReport:
    if d < 1:
        raise ValueError("d must be positive")
    if Qmax is None:
        Qmax = math.isqrt(d)
    pts = [nu / q for q in range(1, Qmax + 1) for nu in roots_mod(d, q)]
    arr = np.array(pts)
    return RootsReport(d, Qmax, arr, star_discrepancy(arr))


# ---------------------------------------------------------------- staged trace


@dataclass(frozen=True)
class TraceConfig:
    eta4: float = 0.05
    eta2: float = 0.03
    dual_length: int = 30_000  # m-range of the Voronoi reconstruction
    poisson_cases: tuple[tuple[int, int], ...] = ((5, 1), (3, 2))  # (q, m)
    poisson_L: int = 30


@dataclass
class TraceReport:
    d: int
    N: int
    U: float
    Omega: float
    smooth: float
    delta_route: float
    voronoi_route: float
    restricted_route: float
    restriction_cutoff: float
    E1: float
    E2: float
    E1_constant: float
    poisson: list[tuple[int, int, complex, complex]]
    seconds: float

    @property
    def delta_gap(self) -> float:
        return abs(self.delta_route - self.smooth) / abs(self.smooth)

    @property
    def reconstruction_gap(self) -> float:
        return abs(self.voronoi_route - self.smooth) / abs(self.smooth)

    @property
    def restriction_tail(self) -> float:
        return abs(self.voronoi_route - self.restricted_route) / abs(self.voronoi_route)

    @property
    def poisson_gaps(self) -> list[float]:
        return [abs(a - b) / abs(a) for _, _, a, b in self.poisson]

    def stage_failures(self, tol: float = 1e-3, tail: float = 1e-4) -> list[str]:
        out = []
        if self.delta_gap > tol:
            out.append("delta-expansion")
        if self.reconstruction_gap > tol:
            out.append("voronoi")
        if self.restriction_tail > tail:
            out.append("restriction")
        if any(g > tol for g in self.poisson_gaps):
            out.append("poisson")
        return out


def delta_route(table: CoefficientTable, kernel, hs: np.ndarray) -> np.ndarray:
    """lambda(h) rebuilt as sum_m lambda(m) phi(m - h) sum_q Delta_q(m - h) c_q(m - h)."""
    U = math.ceil(kernel.U)
    u = np.arange(-U, U + 1)
    weight = np.zeros(len(u))
    for q in range(1, math.ceil(kernel.q_cutoff) + 1):
        dq = np.atleast_1d(delta_q(kernel, q, u.astype(float)))
        if not np.any(dq):
            continue
        cq = np.array([ramanujan(q, int(x)) for x in u], dtype=float)
        weight += dq * cq
    weight *= kernel.phi(u)
    out = np.empty(len(hs))
    for j, h in enumerate(hs):
        out[j] = float(np.dot(table.lambdas(h + u), weight))
    return out


def voronoi_route_terms(
    table: CoefficientTable, kernel, hs: np.ndarray, weights: np.ndarray, M: int
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted dual contributions per m and per q; sum_h weights_h lambda(h) = either total.

    Shifts h that agree mod q share one Kloosterman column, so each q needs the
    transform of one combined window per residue class.
    """
    m = np.arange(1, M + 1)
    lam = table.lambdas(m)
    per_m = np.zeros(M)
    qmax = math.ceil(kernel.q_cutoff)
    per_q = np.zeros(qmax)
    hs = np.asarray(hs)
    weights = np.asarray(weights, dtype=float)
    for q in range(1, qmax + 1):
        split = LevelSplit(table.level, q)
        residues = hs % q
        classes = np.unique(residues)
        mix = (residues[:, None] == classes[None, :]) * weights[:, None]
        gm = gtilde_mixed(kernel, m.astype(float), hs.astype(float), mix, q, split.N2)
        if not np.any(gm):
            continue
        K = kloosterman_table(q)
        a = (m * inverse_mod(split.N2, q)) % q
        scale = -2 * math.pi * eta_sign(table, split.N2) / (q * math.sqrt(split.N2))
        part = lam * np.sum(K[a[:, None], classes[None, :]] * gm, axis=1) * scale
        per_m += part
        per_q[q - 1] = part.sum()
    return per_m, per_q


def pipeline_trace(table: CoefficientTable, query: NonSplitQuery, config: TraceConfig = TraceConfig()) -> TraceReport:
    """Evaluate each stage of the circle-method argument for sum lambda(n^2 + d) V(n/N)."""
    start = time.perf_counter()
    D = query.d
    U = D ** (1 - 2 * config.eta4)
    Omega = D ** (0.5 - config.eta4)
    kernel = build_kernel(U, Omega)
    n = query.n_range()
    V = np.atleast_1d(plateau_window(n / query.N, query.delta))
    hs = n * n + D
    need = int(hs[-1] + math.ceil(U) + 1)
    if max(need, config.dual_length) > table.length:
        raise ValueError(f"coefficient table too short: need {max(need, config.dual_length)}")
    smooth = float(np.sum(table.lambdas(hs) * V))

    delta = float(np.dot(delta_route(table, kernel, hs), V))

    per_m, per_q = voronoi_route_terms(table, kernel, hs, V, config.dual_length)
    full = float(per_m.sum())
    cutoff = D ** (3 * config.eta4)
    restricted = float(per_m[: int(math.floor(cutoff))].sum())

    q1 = D ** (0.5 - 2 * config.eta2)
    qs = np.arange(1, len(per_q) + 1)
    E1 = float(np.sum(per_q[qs <= q1]))
    E2 = float(np.sum(per_q[qs > q1]))

    poisson = []
    smooth_window = lambda t: np.atleast_1d(plateau_window(t, query.delta))
    for q, m in config.poisson_cases:
        if q >= kernel.q_cutoff:
            continue
        left, right = poisson_sides(kernel, m, q, LevelSplit(table.level, q), smooth_window, query.N, D, config.poisson_L)
        poisson.append((q, m, left, right))

    return TraceReport(
        d=D,
        N=query.N,
        U=U,
        Omega=Omega,
        smooth=smooth,
        delta_route=delta,
        voronoi_route=full,
        restricted_route=restricted,
        restriction_cutoff=cutoff,
        E1=E1,
        E2=E2,
        E1_constant=abs(E1) / math.sqrt(D),
        poisson=poisson,
        seconds=time.perf_counter() - start,
    )
