"""Exact and brute-force reference computations.

Nothing here uses the closed forms of ``ldp`` or ``pricer``: the binomial
law is evaluated directly, the entropy minimization is a grid search over
candidate laws, and small pools are priced by exhaustive enumeration of the
multinomial outcomes.  The only shared code is the leg valuation kernel in
``sim``, which is deliberate, since enumeration is what certifies it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
import numpy as np
from scipy import optimize

from .errors import AssumptionViolated, CombinatorialBlowup, InvalidParameter, UndefinedSpread
from .models import TabulatedCurve
from .pricer import TrancheSpec, ceil_lattice, first_loss_count, snap_lattice
from .sim import leg_values

MAX_OUTCOMES = 1_000_000
MAX_ATOMS = 5

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


# --- binomial law -------------------------------------------------------------


def _stirlerr(x: np.ndarray) -> np.ndarray:
    """ln Γ(x+1) − (x+½)ln x + x − ½ln 2π, the Stirling remainder."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= 15
    xs = x[small]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.array([math.lgamma(v + 1.0) for v in xs]) - (xs + 0.5) * np.log(xs) + xs - _HALF_LOG_2PI
    out[small] = np.where(xs == 0, 0.0, vals) if xs.size else vals
    xl = x[~small]
    inv2 = 1.0 / (xl * xl)
    series = (1 / 12 - inv2 * (1 / 360 - inv2 * (1 / 1260 - inv2 * (1 / 1680 - inv2 / 1188)))) / xl
    out[~small] = series
    return out


def _bd0(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """x ln(x/m) + m − x, evaluated without cancellation near x = m."""
    x = np.asarray(x, dtype=float)
    m = np.broadcast_to(np.asarray(m, dtype=float), x.shape)
    out = np.empty_like(x)
    near = np.abs(x - m) < 0.1 * (x + m)
    xn, mn = x[near], m[near]
    v = (xn - mn) / (xn + mn)
    s = (xn - mn) * v
    ej = 2 * xn * v
    v2 = v * v
    for j in range(1, 1000):
        ej = ej * v2
        s1 = s + ej / (2 * j + 1)
        if np.all(s1 == s):
            break
        s = s1
    out[near] = s
    xf, mf = x[~near], m[~near]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~near] = np.where(xf == 0, mf, xf * np.log(xf / mf) + mf - xf)
    return out


def binomial_logpmf(n: int, p: float, k) -> np.ndarray:
    """ln P{Bin(n, p) = k} by the saddle-point (Loader) decomposition."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter("binomial probability must lie in [0, 1]")
    k_arr = np.asarray(k, dtype=float)
    if np.any((k_arr < 0) | (k_arr > n)) or np.any(k_arr != np.floor(k_arr)):
        raise InvalidParameter("binomial outcome must be an integer in [0, n]")
    q = 1.0 - p
    out = np.empty_like(k_arr, dtype=float)
    flat_k = k_arr.reshape(-1)
    flat = out.reshape(-1)
    for_edges = (flat_k == 0) | (flat_k == n)
    if p == 0.0 or q == 0.0:
        hit = (flat_k == 0) if p == 0.0 else (flat_k == n)
        flat[:] = np.where(hit, 0.0, -np.inf)
        return out if np.ndim(k) else float(out)
    # k = 0 and k = n in closed form
    lo = -_bd0(np.array([float(n)]), n * q)[0] - n * p if p < 0.1 else n * math.log(q)
    hi = -_bd0(np.array([float(n)]), n * p)[0] - n * q if q < 0.1 else n * math.log(p)
    flat[flat_k == 0] = lo
    flat[flat_k == n] = hi
    mid = ~for_edges
    km = flat_k[mid]
    if km.size:
        lc = (
            _stirlerr(np.array([float(n)]))[0]
            - _stirlerr(km)
            - _stirlerr(n - km)
            - _bd0(km, n * p)
            - _bd0(n - km, n * q)
        )
        lf = math.log(2 * math.pi) + np.log(km) + np.log1p(-km / n)
        flat[mid] = lc - 0.5 * lf
    return out if np.ndim(k) else float(out)


def binomial_pmf(n: int, p: float, k):
    """P{Bin(n, p) = k}."""
    return np.exp(binomial_logpmf(n, p, k))


def binomial_tail(n: int, p: float, threshold: float) -> float:
    """P{Bin(n, p) > n·threshold}, summed exactly over the smaller tail."""
    k0 = first_loss_count(n, threshold) if threshold >= 0 else 0
    if k0 > n:
        return 0.0
    if k0 <= 0:
        return 1.0
    if k0 > n * p:
        ks = np.arange(k0, n + 1)
        return math.fsum(binomial_pmf(n, p, ks))
    ks = np.arange(0, k0)
    return 1.0 - math.fsum(binomial_pmf(n, p, ks))


@dataclass(frozen=True)
class LocalCLTScan:
    n: int
    alpha: float
    counts: np.ndarray
    ratios: np.ndarray

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.ratios - 1.0)))


def local_clt_table(n: int, alpha: float) -> LocalCLTScan:
    """pmf·√(2πnα(1−α)) for every k with 0 ≤ k − nα ≤ n^{1/4}."""
    if not 0 < alpha < 1:
        raise InvalidParameter("alpha must lie in (0, 1)")
    lo = ceil_lattice(n, alpha)
    hi = int(math.floor(snap_lattice(n * alpha + n**0.25)))
    ks = np.arange(lo, min(hi, n) + 1)
    ratios = binomial_pmf(n, alpha, ks) * math.sqrt(2 * math.pi * n * alpha * (1 - alpha))
    return LocalCLTScan(n, alpha, ks, np.asarray(ratios))


def local_clt_scan(n: int, alpha: float) -> float:
    """Largest relative deviation of the binomial pmf from the local-CLT value
    over the window 0 ≤ k − nα ≤ n^{1/4}."""
    return local_clt_table(n, alpha).max_abs_error


# --- discrete laws and entropy minimization -----------------------------------


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely many atoms (time, mass); ``math.inf`` is a legal time."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(t), float(m)) for t, m in self.atoms)
        if not atoms:
            raise InvalidParameter("a discrete law needs at least one atom")
        times = [t for t, _ in atoms]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or times[0] < 0:
            raise InvalidParameter("atom times must be distinct, sorted and nonnegative")
        if any(m <= 0 for _, m in atoms):
            raise InvalidParameter("atom masses must be positive")
        if abs(math.fsum(m for _, m in atoms) - 1.0) > 1e-14:
            raise InvalidParameter("atom masses must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms])

    def mass_before(self, t_expiry: float) -> float:
        return math.fsum(m for t, m in self.atoms if t < t_expiry)

    def to_curve(self) -> TabulatedCurve:
        return TabulatedCurve.from_atoms(self.atoms)


def relative_entropy(p: np.ndarray, q: np.ndarray) -> float:
    """Σ p ln(p/q) on a common finite support, with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    if np.any(q[pos] == 0):
        return math.inf
    return math.fsum(p[pos] * np.log(p[pos] / q[pos]))


def _simplex_grid(parts: int, resolution: int) -> np.ndarray:
    if parts == 1:
        return np.ones((1, 1))
    rows = [
        np.diff(np.concatenate([[0], cuts, [resolution]])) / resolution
        for cuts in itertools.combinations_with_replacement(range(resolution + 1), parts - 1)
    ]
    return np.array(rows)


def _side_minimum(masses: np.ndarray, total: float, resolution: int):
    """Minimize Σ a′ ln(a′/a) over allocations a′ of ``total`` to ``masses``."""
    if total == 0:
        return 0.0, np.zeros_like(masses)
    grid = _simplex_grid(masses.size, resolution)
    alloc = total * grid
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(alloc > 0, alloc * np.log(alloc / masses), 0.0)
    values = terms.sum(axis=1)
    best = int(np.argmin(values))
    value, share = float(values[best]), grid[best]
    if masses.size == 2:
        # polish inside the neighbouring grid cells
        w0 = share[0]
        lo, hi = max(0.0, w0 - 1.0 / resolution), min(1.0, w0 + 1.0 / resolution)

        def f(w):
            return relative_entropy(total * np.array([w, 1 - w]), masses)

        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun < value:
            value, share = float(res.fun), np.array([res.x, 1 - res.x])
    return value, total * share


@dataclass(frozen=True)
class RateMinimum:
    value: float
    level: float
    allocation: np.ndarray
    proportional: np.ndarray
    levels: np.ndarray
    level_minima: np.ndarray

    @property
    def allocation_error(self) -> float:
        """Largest distance between the minimizing and the proportionally scaled law."""
        return float(np.max(np.abs(self.allocation - self.proportional)))


def rate_min_bruteforce(alpha: float, base: DiscreteLaw, t_expiry: float, grid: int = 200) -> RateMinimum:
    """Grid search for inf{H(μ′|μ) : μ′[0,T) ≥ α} over μ′ on the support of μ.

    Scans ``grid`` levels α′ ∈ [α, 1] and, for each, the allocation of α′
    among the atoms before T and of 1 − α′ among the rest.
    """
    if not 0 < alpha < 1:
        raise InvalidParameter("alpha must lie in (0, 1)")
    masses = base.masses
    before = base.times < t_expiry
    f = base.mass_before(t_expiry)
    if f > alpha:
        raise AssumptionViolated(f"investment-grade analog requires mass before T ≤ α; got {f!r} > {alpha!r}")
    if before.sum() > 3 or (~before).sum() > 3:
        raise InvalidParameter("at most three atoms on each side of T are scanned")
    if not before.any() or before.all():
        raise InvalidParameter("base law needs atoms on both sides of T")
    levels = alpha + (1 - alpha) * np.arange(grid) / (grid - 1)
    minima = np.empty(grid)
    allocations = []
    for i, lvl in enumerate(levels):
        v1, a1 = _side_minimum(masses[before], lvl, grid)
        v2, a2 = _side_minimum(masses[~before], 1 - lvl, grid)
        minima[i] = v1 + v2
        alloc = np.empty_like(masses)
        alloc[before], alloc[~before] = a1, a2
        allocations.append(alloc)
    best = int(np.argmin(minima))
    proportional = np.where(before, masses * alpha / f, masses * (1 - alpha) / (1 - f))
    return RateMinimum(float(minima[best]), float(levels[best]), allocations[best], proportional, levels, minima)


# --- exhaustive small-pool pricing --------------------------------------------


def _compositions(n: int, parts: int):
    """All (c_1..c_parts) with Σc = n, in lexicographic order."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first, *rest)


@dataclass(frozen=True)
class ExactPrice:
    prot: float
    prem: float
    spread: float
    total_probability: float
    outcomes: int

    def __iter__(self):
        return iter((self.prot, self.prem, self.spread))


def enumerate_exact_price(base: DiscreteLaw, tranche: TrancheSpec, n: int) -> ExactPrice:
    """Expected legs over every multinomial outcome of n names on the atoms."""
    m = len(base.atoms)
    if m > MAX_ATOMS:
        raise InvalidParameter(f"enumeration supports at most {MAX_ATOMS} atoms")
    count = math.comb(n + m - 1, m - 1)
    if count > MAX_OUTCOMES:
        raise CombinatorialBlowup(f"{count} outcomes exceed the cap of {MAX_OUTCOMES}")
    times, masses = base.times, base.masses
    outcomes = np.array(list(_compositions(n, m)), dtype=np.int64)
    log_masses = np.log(masses)
    log_prob = (
        math.lgamma(n + 1)
        - np.array([[math.lgamma(c + 1) for c in row] for row in outcomes]).sum(axis=1)
        + outcomes @ log_masses
    )
    prob = np.exp(log_prob)
    window = times <= tranche.t_expiry
    scenarios = np.full((len(outcomes), n), np.inf)
    for r, row in enumerate(outcomes):
        # atoms are sorted, so repeating them in order gives a sorted scenario
        seq = np.repeat(times[window], row[window])
        scenarios[r, : seq.size] = seq
    prot, prem = leg_values(scenarios, n, tranche)
    e_prot = math.fsum(prob * prot)
    e_prem = math.fsum(prob * prem)
    if e_prem == 0:
        raise UndefinedSpread("premium leg has zero expectation")
    return ExactPrice(e_prot, e_prem, e_prot / e_prem, math.fsum(prob), len(outcomes))


def exact_protection_count_only(n: int, p: float, tranche: TrancheSpec) -> float:
    """E[P^prot] when R = 0: Σ_k P{Bin(n,p)=k}·L̄(k), which needs no times."""
    if tranche.riskless_rate != 0:
        raise InvalidParameter("count-only protection value needs R = 0")
    ks = np.arange(n + 1)
    lo = snap_lattice(n * tranche.alpha)
    hi = snap_lattice(n * tranche.beta)
    level = np.clip((ks - lo) / (hi - lo), 0.0, 1.0)
    keep = level > 0
    return math.fsum(binomial_pmf(n, p, ks[keep]) * level[keep])
