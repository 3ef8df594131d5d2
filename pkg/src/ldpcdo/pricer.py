"""Closed-form large-pool asymptotics for investment-grade tranches.

The protection leg is decomposed as

    prefactor · exp(−κ·g) · bracket · exp(−N·ℏ(α, F(T−)))

with g = ⌈Nα⌉ − Nα the lattice granularity.  The vanishing error term of the
asymptotic expansion is set to zero throughout; the simulation module is
where finite-N accuracy is checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InvalidParameter, NonUniqueMinimizer, ig_violation
from .ldp import hbar, kappa as tilt_exponent, rate_I

# relative tolerance under which N·α is treated as an exact integer
LATTICE_SNAP = 1e-9


def snap_lattice(x: float) -> float:
    """Round x to the nearest integer when it is one up to floating-point noise."""
    r = round(x)
    if abs(x - r) <= LATTICE_SNAP * max(1.0, abs(x)):
        return float(r)
    return x


def ceil_lattice(n: int, alpha: float) -> int:
    """⌈nα⌉ with nα snapped to an integer when it is one up to rounding."""
    return int(math.ceil(snap_lattice(n * alpha)))


def first_loss_count(n: int, alpha: float) -> int:
    """Smallest default count k with k/n > α (the first count that hits the tranche)."""
    x = snap_lattice(n * alpha)
    return int(x) + 1 if x == int(x) else int(math.ceil(x))


def granularity(n: int, alpha: float) -> float:
    """⌈nα⌉ − nα; exactly 0 when nα is an integer."""
    if n < 1:
        raise InvalidParameter("pool size must be at least 1")
    x = snap_lattice(n * alpha)
    return float(math.ceil(x) - x)


@dataclass(frozen=True)
class TrancheSpec:
    alpha: float
    beta: float
    t_expiry: float
    payment_dates: tuple
    riskless_rate: float = 0.0

    def __post_init__(self):
        dates = tuple(float(t) for t in self.payment_dates)
        object.__setattr__(self, "payment_dates", dates)
        if not 0.0 <= self.alpha < self.beta <= 1.0:
            raise InvalidParameter(f"need 0 ≤ α < β ≤ 1; got α={self.alpha!r}, β={self.beta!r}")
        if not self.t_expiry > 0:
            raise InvalidParameter("expiry must be positive")
        if len(dates) == 0:
            raise InvalidParameter("at least one payment date is required")
        if any(t2 <= t1 for t1, t2 in zip(dates, dates[1:])):
            raise InvalidParameter("payment dates must be strictly increasing")
        if dates[0] < 0 or dates[-1] > self.t_expiry:
            raise InvalidParameter("payment dates must lie in [0, t_expiry]")
        if self.riskless_rate < 0:
            raise InvalidParameter("riskless rate must be nonnegative")

    @classmethod
    def quarterly(cls, alpha, beta, t_expiry, riskless_rate=0.0) -> "TrancheSpec":
        return cls(alpha, beta, t_expiry, quarterly_dates(t_expiry), riskless_rate)

    @property
    def width(self) -> float:
        return self.beta - self.alpha

    @property
    def annuity(self) -> float:
        """Σ_{t∈𝒯} e^{−Rt}, the riskless premium annuity."""
        return math.fsum(math.exp(-self.riskless_rate * t) for t in self.payment_dates)


def quarterly_dates(t_expiry: float) -> tuple:
    """{0.25, 0.5, …, T}; T itself is always the last date."""
    count = int(math.floor(t_expiry * 4 + 1e-9))
    dates = [0.25 * i for i in range(1, count + 1)]
    if not dates or abs(dates[-1] - t_expiry) > 1e-12:
        dates.append(float(t_expiry))
    else:
        dates[-1] = float(t_expiry)
    return tuple(dates)


@dataclass(frozen=True)
class AsymptoticPrice:
    """value = prefactor · exp(−κ·granularity) · bracket · exp(−exponent)."""

    value: float
    log_value: float
    exponent: float
    prefactor: float
    granularity: float
    bracket: float
    kappa: float

    @property
    def log10_value(self) -> float:
        return self.log_value / math.log(10.0)


def _bracket(alpha: float, f: float, g: float) -> float:
    # e^{−κ}/(1−e^{−κ})² and 1/(1−e^{−κ}) written without κ
    core = alpha * (1 - alpha) * f * (1 - f) / (alpha - f) ** 2
    return core + g * alpha * (1 - f) / (alpha - f)


def protection_leg_asymptotic(n: int, tranche: TrancheSpec, f_t_minus: float) -> AsymptoticPrice:
    """Leading-order E[P^prot_N] for the independent homogeneous pool."""
    if n < 1:
        raise InvalidParameter("pool size must be at least 1")
    a = tranche.alpha
    rate = rate_I(a, f_t_minus)
    k = tilt_exponent(a, f_t_minus)
    g = granularity(n, a)
    prefactor = math.exp(-tranche.riskless_rate * tranche.t_expiry) / (
        n**1.5 * tranche.width * math.sqrt(2 * math.pi * a * (1 - a))
    )
    bracket = _bracket(a, f_t_minus, g)
    exponent = n * rate
    log_value = math.log(prefactor) - k * g + math.log(bracket) - exponent
    return AsymptoticPrice(math.exp(log_value), log_value, exponent, prefactor, g, bracket, k)


def spread_asymptotic(n: int, tranche: TrancheSpec, f_t_minus: float) -> AsymptoticPrice:
    """Protection asymptotic divided by the riskless annuity Σ e^{−Rt}."""
    prot = protection_leg_asymptotic(n, tranche, f_t_minus)
    annuity = tranche.annuity
    log_value = prot.log_value - math.log(annuity)
    return AsymptoticPrice(
        prot.value / annuity,
        log_value,
        prot.exponent,
        prot.prefactor / annuity,
        prot.granularity,
        prot.bracket,
        prot.kappa,
    )


def log_theoretical_price_star(n: int, alpha: float, f_t_minus: float) -> float:
    rate = rate_I(alpha, f_t_minus)
    k = tilt_exponent(alpha, f_t_minus)
    g = granularity(n, alpha)
    return (
        -k * g
        - 1.5 * math.log(n)
        - 0.5 * math.log(alpha * (1 - alpha))
        + math.log(_bracket(alpha, f_t_minus, g))
        - n * rate
    )


def theoretical_price_star(n: int, alpha: float, f_t_minus: float) -> float:
    """S*_N: the asymptotic spread stripped of e^{−RT}/({Σe^{−Rt}}(β−α)√(2π))."""
    return math.exp(log_theoretical_price_star(n, alpha, f_t_minus))


def star_prefactor(tranche: TrancheSpec) -> float:
    """The factor removed from the asymptotic spread to obtain S*_N."""
    return math.exp(-tranche.riskless_rate * tranche.t_expiry) / (
        tranche.annuity * tranche.width * math.sqrt(2 * math.pi)
    )


def _quarter_root(n: int) -> float:
    r = math.isqrt(math.isqrt(n))
    return float(r) if r**4 == n else n**0.25


@dataclass(frozen=True)
class GeometricSum:
    truncated: float
    closed_form: float
    bound: float

    def __iter__(self):
        return iter((self.truncated, self.closed_form, self.bound))


def tilted_geometric_sum(n: int, alpha: float, kappa: float) -> GeometricSum:
    """Σ (j−nα) e^{−κ(j−nα)} over 0 ≤ j−nα ≤ n^{1/4}, its infinite-sum closed
    form, and the a-priori bound on their difference."""
    if not kappa > 0:
        raise InvalidParameter("kappa must be positive")
    g = granularity(n, alpha)
    lo = ceil_lattice(n, alpha)
    hi = int(math.floor(snap_lattice(n * alpha + _quarter_root(n))))
    terms = [(j + g) * math.exp(-kappa * (j + g)) for j in range(0, hi - lo + 1)]
    truncated = math.fsum(terms)
    q = -math.expm1(-kappa)
    closed = math.exp(-kappa * g) * (math.exp(-kappa) / q**2 + g / q)
    bound = 4 * math.exp(-1) * math.exp(-0.5 * kappa * (_quarter_root(n) - 1)) / (kappa * q**2)
    return GeometricSum(truncated, closed, bound)


# --- finite-state correlation ----------------------------------------------


@dataclass(frozen=True)
class MixtureStates:
    """Systemic states with weights p(x) and conditional default levels f_x = μ([0,T), x)."""

    weights: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        f = np.asarray(self.levels, dtype=float)
        if w.ndim != 1 or w.shape != f.shape or w.size == 0:
            raise InvalidParameter("mixture needs equally many weights and levels")
        if np.any(w < 0):
            raise InvalidParameter("mixture weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidParameter(f"mixture weights must sum to 1; got {math.fsum(w)!r}")
        if np.any((f < 0) | (f > 1)):
            raise InvalidParameter("conditional default levels must lie in [0, 1]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "levels", f)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple]) -> "MixtureStates":
        return cls(np.array([p for p, _ in pairs]), np.array([f for _, f in pairs]))

    def __len__(self) -> int:
        return self.weights.size

    def check_investment_grade(self, alpha: float) -> None:
        bad = np.flatnonzero(self.levels >= alpha)
        if bad.size:
            i = int(bad[np.argmax(self.levels[bad])])
            raise ig_violation(alpha, float(self.levels[i]), where=f"state {i}")


def mixture_protection_asymptotic(n: int, tranche: TrancheSpec, states: MixtureStates) -> float:
    """Σ_x p(x) · (homogeneous asymptotic with F(T−) = f_x)."""
    states.check_investment_grade(tranche.alpha)
    terms = [
        p * protection_leg_asymptotic(n, tranche, float(f)).value
        for p, f in zip(states.weights, states.levels)
        # a state without defaults before T never reaches the tranche
        if p > 0 and f > 0
    ]
    return math.fsum(terms)


@dataclass(frozen=True)
class DominantState:
    index: int
    rate: float
    approximation: float


def dominant_state(states: MixtureStates, alpha: float, n: int = None, tranche: TrancheSpec = None) -> DominantState:
    """The state with the smallest entropy rate ℏ(α, f_x).

    When ``n`` and ``tranche`` are given, the single-term approximation
    p(x*)·(homogeneous asymptotic at f_{x*}) is reported alongside.
    """
    states.check_investment_grade(alpha)
    rates = np.array([hbar(alpha, float(f)) for f in states.levels])
    best = int(np.argmin(rates))
    ties = np.flatnonzero(np.abs(rates - rates[best]) <= 1e-12)
    if ties.size > 1:
        raise NonUniqueMinimizer(f"entropy minimum is shared by states {ties.tolist()}")
    approx = math.nan
    if n is not None and tranche is not None:
        approx = float(states.weights[best]) * protection_leg_asymptotic(n, tranche, float(states.levels[best])).value
    return DominantState(best, float(rates[best]), approx)


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_sf(x):
    """1 − Φ(x) without cancellation."""
    return special.ndtr(-np.asarray(x, dtype=float))


def std_normal_ppf(p):
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)) or np.any(np.isnan(p_arr)):
        raise InvalidParameter("inverse normal CDF needs arguments in (0, 1)")
    return special.ndtri(p)


def gaussian_copula_states(p_default: float, rho: float, m: int) -> MixtureStates:
    """Discretized one-factor Gaussian copula on the grid x_i = i/M, |i| ≤ M².

    Interior cells get Φ(x+1/2M) − Φ(x−1/2M); the two end cells absorb the
    tails.  Conditional levels are Φ((Φ⁻¹(p) − ρx)/√(1−ρ²)).
    """
    if not 0 < p_default < 1:
        raise InvalidParameter("default probability must lie in (0, 1)")
    if not 0 < rho < 1:
        raise InvalidParameter("copula correlation must lie in (0, 1); negative correlation is not supported")
    if m < 1:
        raise InvalidParameter("copula resolution must be at least 1")
    i = np.arange(-m * m, m * m + 1)
    x = i / m
    h = 0.5 / m
    upper = x + h
    lower = x - h
    # differences taken in whichever tail keeps both terms small
    left = special.ndtr(upper) - special.ndtr(lower)
    right = special.ndtr(-lower) - special.ndtr(-upper)
    w = np.where(x > 0, right, left)
    w[0] = special.ndtr(upper[0])
    w[-1] = special.ndtr(-lower[-1])
    levels = special.ndtr((special.ndtri(p_default) - rho * x) / math.sqrt(1 - rho * rho))
    return MixtureStates(w, levels)
