"""Bernoulli relative entropy, the tilting exponent and the tilted default law.

Everything is measured in nats.  The rate of the tranche-loss event is the
relative entropy of a coin with bias α against a coin with bias F(T−), and
the minimizing law rescales μ by one constant before expiry and another
after it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateCurve, InvalidParameter, ig_violation
from .models import DefaultCurve


def _xlogx_over(x: float, y: float) -> float:
    # x ln(x/y) with 0 ln 0 = 0
    if x == 0.0:
        return 0.0
    return x * math.log(x / y)


def hbar(a1: float, a2: float) -> float:
    """Relative entropy of Bernoulli(a1) with respect to Bernoulli(a2).

    Follows the four-case definition; the point (1, 1) is extended to 0 by
    continuity instead of falling into the infinite branch.
    """
    if not (0.0 <= a1 <= 1.0 and 0.0 <= a2 <= 1.0):
        raise InvalidParameter(f"hbar arguments must lie in [0, 1]; got ({a1!r}, {a2!r})")
    if 0.0 < a1 < 1.0 and 0.0 < a2 < 1.0:
        return _xlogx_over(a1, a2) + _xlogx_over(1.0 - a1, 1.0 - a2)
    if a1 == 1.0 and 0.0 < a2 < 1.0:
        return -math.log(a2)
    if a1 == 0.0 and 0.0 <= a2 < 1.0:
        return -math.log1p(-a2)
    if a1 == 1.0 and a2 == 1.0:
        return 0.0
    return math.inf


def hbar_derivative(a1: float, a2: float) -> float:
    """∂ℏ/∂a1 = ln((a1/(1−a1))·((1−a2)/a2)) on the open square."""
    return math.log(a1 / (1.0 - a1)) - math.log(a2 / (1.0 - a2))


@dataclass(frozen=True)
class TwoPointEntropy:
    a1: float
    a2: float
    value: float


def two_point_entropy(a1: float, a2: float) -> TwoPointEntropy:
    return TwoPointEntropy(a1, a2, hbar(a1, a2))


def _check_ig(alpha: float, f_t_minus: float) -> None:
    if not 0.0 < f_t_minus < 1.0:
        raise DegenerateCurve(f"F(T−) must lie in (0, 1); got {f_t_minus!r}")
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter(f"attachment alpha must lie in (0, 1); got {alpha!r}")
    if not alpha > f_t_minus:
        raise ig_violation(alpha, f_t_minus)


def rate_I(alpha: float, f_t_minus: float) -> float:
    """Exponential decay rate of P{L_{T−} > α}: ℏ(α, F(T−))."""
    _check_ig(alpha, f_t_minus)
    return hbar(alpha, f_t_minus)


def kappa(alpha: float, f_t_minus: float) -> float:
    """Tilting exponent ln((α/(1−α))·((1−F(T−))/F(T−))); positive when α > F(T−)."""
    _check_ig(alpha, f_t_minus)
    return hbar_derivative(alpha, f_t_minus)


@dataclass(frozen=True)
class TiltedMeasure:
    """The entropy-minimizing law: μ scaled by α/F(T−) on [0,T) and by
    (1−α)/(1−F(T−)) on [T,∞]."""

    alpha: float
    f_t_minus: float
    scale_before: float
    scale_after: float
    t_expiry: float
    curve: Optional[DefaultCurve] = field(default=None, repr=False, compare=False)

    @property
    def phi_before(self) -> float:
        return math.log(self.scale_before)

    @property
    def phi_after(self) -> float:
        return math.log(self.scale_after)

    @property
    def total_mass(self) -> float:
        return self.scale_before * self.f_t_minus + self.scale_after * (1.0 - self.f_t_minus)

    @property
    def kappa(self) -> float:
        return self.phi_before - self.phi_after

    @property
    def rate(self) -> float:
        return hbar(self.alpha, self.f_t_minus)

    def sample(self, stream: np.random.Generator, size: int) -> np.ndarray:
        """Two-stage draw: Bernoulli(α) for {τ < T}, then μ restricted to the
        chosen side of T."""
        if self.curve is None:
            raise InvalidParameter("tilted measure was built without a curve and cannot be sampled")
        u = stream.random((2, size))
        before = u[0] < self.alpha
        # 1 − u lies in (0, 1], so the conditional CDF level never hits 0
        level_before = self.f_t_minus * (1.0 - u[1])
        level_after = self.f_t_minus + (1.0 - self.f_t_minus) * (1.0 - u[1])
        return np.asarray(self.curve.quantile(np.where(before, level_before, level_after)), dtype=float)


def tilted_split(curve: DefaultCurve, alpha: float, t_expiry: float) -> TiltedMeasure:
    f_minus = float(curve.left_limit(t_expiry))
    _check_ig(alpha, f_minus)
    return TiltedMeasure(
        alpha=alpha,
        f_t_minus=f_minus,
        scale_before=alpha / f_minus,
        scale_after=(1.0 - alpha) / (1.0 - f_minus),
        t_expiry=t_expiry,
        curve=curve,
    )


@dataclass(frozen=True)
class TwoPointLaw:
    """Masses of a law on [0, T) and on [T, ∞]."""

    before: float
    after: float

    def __post_init__(self):
        if self.before < 0 or self.after < 0 or abs(self.before + self.after - 1.0) > 1e-12:
            raise InvalidParameter(f"two-point law needs nonnegative masses summing to 1; got {self}")

    @classmethod
    def from_before(cls, before: float) -> "TwoPointLaw":
        return cls(before, 1.0 - before)


def entropy_dual_gap(phi_before: float, phi_after: float, mu_prime: TwoPointLaw, mu: TwoPointLaw) -> float:
    """H(μ′|μ) − [∫φ dμ′ − ln ∫e^φ dμ] for the step function φ.

    Nonnegative by the variational formula for relative entropy and zero at
    φ = ln dμ′/dμ.
    """
    h = hbar(mu_prime.before, mu.before)
    if math.isinf(h):
        return math.inf
    linear = 0.0
    if mu_prime.before > 0:
        linear += phi_before * mu_prime.before
    if mu_prime.after > 0:
        linear += phi_after * mu_prime.after
    terms = [math.log(m) + p for m, p in ((mu.before, phi_before), (mu.after, phi_after)) if m > 0]
    log_mgf = float(np.logaddexp.reduce(terms))
    return h - (linear - log_mgf)

