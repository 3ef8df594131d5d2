"""Marginal default-time laws on the compactified half-line [0, ∞].

Three parameterizations are supported: a reduced-form (piecewise-constant
hazard) curve, the Merton first-passage curve, and a tabulated CDF.  Every
curve exposes a vectorized ``cdf``, ``left_limit`` and generalized-inverse
``quantile``; the value ``math.inf`` is the point at infinity and is ordered
above all finite times.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidParameter, NoRoot

INFINITY = math.inf

# root bracket for the flat-hazard calibrator
LAMBDA_MIN = 1e-12
LAMBDA_MAX = 10.0


def _as_array(x):
    return np.asarray(x, dtype=float)


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


class DefaultCurve:
    """Common interface of the marginal law μ of a single default time."""

    kind: str = ""

    def cdf(self, t):
        """F(t) = μ[0, t]; zero for t < 0."""
        raise NotImplementedError

    def left_limit(self, t):
        """F(t−) = sup_{s<t} F(s)."""
        raise NotImplementedError

    def quantile(self, u):
        """Generalized inverse inf{t : F(t) ≥ u}, or ∞ when u exceeds lim F."""
        raise NotImplementedError

    @property
    def mass_at_infinity(self) -> float:
        raise NotImplementedError

    def density(self, t):
        raise NotImplementedError(f"{self.kind} curve has no density")

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ReducedFormCurve(DefaultCurve):
    """Piecewise-constant hazard λ.

    ``breaks[i]`` is the right end of the i-th hazard segment; the last rate
    is extended flat beyond the last break.
    """

    breaks: tuple
    rates: tuple
    kind: str = field(default="reduced_form", init=False)

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        rates = tuple(float(r) for r in self.rates)
        if len(breaks) == 0 or len(breaks) != len(rates):
            raise InvalidParameter("hazard needs one 'until' per 'lambda' and at least one segment")
        if any(r <= 0 or not math.isfinite(r) for r in rates):
            raise InvalidParameter("hazard rates must be positive and finite")
        if breaks[0] <= 0 or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise InvalidParameter("hazard 'until' values must be positive and strictly increasing")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def flat(cls, rate: float) -> "ReducedFormCurve":
        return cls(breaks=(1.0,), rates=(rate,))

    @cached_property
    def _grid(self):
        edges = np.concatenate([[0.0], self.breaks[:-1]])
        widths = np.diff(np.concatenate([edges, [self.breaks[-1]]]))[:-1]
        rates = np.asarray(self.rates)
        cum = np.concatenate([[0.0], np.cumsum(rates[:-1] * widths)])
        return edges, rates, cum

    def cumulative_hazard(self, t):
        t_arr = np.maximum(_as_array(t), 0.0)
        edges, rates, cum = self._grid
        idx = np.searchsorted(edges, t_arr, side="right") - 1
        idx = np.clip(idx, 0, len(rates) - 1)
        out = cum[idx] + rates[idx] * (t_arr - edges[idx])
        return _unwrap(t, out)

    def cdf(self, t):
        t_arr = _as_array(t)
        out = np.where(t_arr < 0, 0.0, -np.expm1(-np.asarray(self.cumulative_hazard(t_arr))))
        return _unwrap(t, out)

    def left_limit(self, t):
        return self.cdf(t)

    def density(self, t):
        t_arr = _as_array(t)
        edges, rates, _ = self._grid
        idx = np.clip(np.searchsorted(edges, t_arr, side="right") - 1, 0, len(rates) - 1)
        lam = rates[idx]
        out = np.where(t_arr < 0, 0.0, lam * np.exp(-np.asarray(self.cumulative_hazard(t_arr))))
        return _unwrap(t, out)

    def quantile(self, u):
        u_arr = _as_array(u)
        edges, rates, cum = self._grid
        with np.errstate(divide="ignore"):
            target = -np.log1p(-u_arr)
        idx = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(rates) - 1)
        out = edges[idx] + (target - cum[idx]) / rates[idx]
        out = np.where(u_arr <= 0, 0.0, out)
        return _unwrap(u, out)

    @property
    def mass_at_infinity(self) -> float:
        return 0.0

    def to_json(self) -> dict:
        return {
            "kind": "reduced_form",
            "hazard": [{"until": b, "lambda": r} for b, r in zip(self.breaks, self.rates)],
        }


@dataclass(frozen=True)
class MertonCurve(DefaultCurve):
    """First passage of the log-value below ln K under drift θ and volatility σ.

    The CDF is obtained by adaptive quadrature of the density.  Quantiles come
    from a cached table of the CDF on a geometric time grid.
    """

    sigma: float
    theta: float
    barrier: float
    kind: str = field(default="merton", init=False)

    # quantile table resolution and horizon
    table_size: int = field(default=4096, repr=False, compare=False)
    horizon: float = field(default=1e4, repr=False, compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameter("Merton volatility must be positive")
        if not 0 < self.barrier < 1:
            raise InvalidParameter("Merton barrier must lie in (0, 1)")
        if not math.isfinite(self.theta):
            raise InvalidParameter("Merton drift must be finite")

    @property
    def _distance(self) -> float:
        return math.log(1.0 / self.barrier)

    @property
    def _drift(self) -> float:
        return self.theta - 0.5 * self.sigma**2

    def density(self, t):
        t_arr = _as_array(t)
        b, nu, s2 = self._distance, self._drift, self.sigma**2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tt = np.where(t_arr > 0, t_arr, 1.0)
            out = b / np.sqrt(2 * math.pi * s2 * tt**3) * np.exp(-((nu * tt + b) ** 2) / (2 * s2 * tt))
        out = np.where(t_arr > 0, out, 0.0)
        return _unwrap(t, out)

    def _integrate(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        f = lambda s: float(self.density(s))
        # geometric breakpoints keep the peaked integrand resolved on long ranges
        scale = self._distance**2 / self.sigma**2
        pts = [p for p in scale * 2.0 ** np.arange(-12, 30) if a < p < b]
        edges = [a, *pts, b]
        total = 0.0
        for lo, hi in zip(edges, edges[1:]):
            val, _ = integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=200)
            total += val
        return total

    def _cdf_scalar(self, t: float) -> float:
        if t <= 0:
            return 0.0
        return min(self._integrate(0.0, t), 1.0)

    def cdf(self, t):
        t_arr = _as_array(t)
        out = np.vectorize(self._cdf_scalar, otypes=[float])(t_arr)
        return _unwrap(t, out)

    def left_limit(self, t):
        return self.cdf(t)

    @property
    def mass_at_infinity(self) -> float:
        nu = self._drift
        if nu <= 0:
            return 0.0
        return -math.expm1(-2.0 * nu * self._distance / self.sigma**2)

    @cached_property
    def _table(self):
        times = np.concatenate([[0.0], np.geomspace(1e-6, self.horizon, self.table_size)])
        pieces = [self._integrate(lo, hi) for lo, hi in zip(times[:-1], times[1:])]
        values = np.concatenate([[0.0], np.cumsum(pieces)])
        values = np.minimum(np.maximum.accumulate(values), 1.0)
        return times, values

    def quantile(self, u):
        u_arr = _as_array(u)
        times, values = self._table
        limit = 1.0 - self.mass_at_infinity
        # keep the strictly increasing part of the table for inversion
        keep = np.concatenate([[True], np.diff(values) > 0])
        out = np.interp(u_arr, values[keep], times[keep])
        out = np.where(u_arr > limit, INFINITY, out)
        out = np.where(u_arr <= 0, 0.0, out)
        return _unwrap(u, out)

    def to_json(self) -> dict:
        return {"kind": "merton", "sigma": self.sigma, "theta": self.theta, "barrier": self.barrier}


@dataclass(frozen=True)
class TabulatedCurve(DefaultCurve):
    """CDF values on a strictly increasing grid starting at t=0.

    ``interp="step"`` gives the right-continuous step function through the
    grid values (atoms at grid points); ``interp="linear"`` interpolates
    monotonically between them.  Mass not reached by the last grid value sits
    at ∞.
    """

    times: tuple
    values: tuple
    interp: str = "step"
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) == 0 or len(times) != len(values):
            raise InvalidParameter("tabulated curve needs matching non-empty 'times' and 'cdf'")
        if times[0] != 0.0:
            raise InvalidParameter("tabulated grid must start at t=0")
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise InvalidParameter("tabulated times must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise InvalidParameter("tabulated CDF values must lie in [0, 1]")
        if any(v2 < v1 for v1, v2 in zip(values, values[1:])):
            raise InvalidParameter("tabulated CDF values must be nondecreasing")
        if self.interp not in ("step", "linear"):
            raise InvalidParameter(f"unknown interpolation {self.interp!r}; use 'step' or 'linear'")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "TabulatedCurve":
        """Step curve with the given (time, mass) atoms; an atom at ∞ is implicit."""
        finite = sorted((float(t), float(m)) for t, m in atoms if math.isfinite(t))
        times, values, acc = [0.0], [0.0], 0.0
        for t, m in finite:
            acc += m
            if t == 0.0:
                values[0] = acc
            else:
                times.append(t)
                values.append(acc)
        return cls(tuple(times), tuple(min(v, 1.0) for v in values), "step")

    @cached_property
    def _arrays(self):
        return np.asarray(self.times), np.asarray(self.values)

    def cdf(self, t):
        t_arr = _as_array(t)
        times, values = self._arrays
        if self.interp == "step":
            idx = np.searchsorted(times, t_arr, side="right") - 1
            out = np.where(idx < 0, 0.0, values[np.maximum(idx, 0)])
        else:
            out = np.where(t_arr < 0, 0.0, np.interp(t_arr, times, values))
        return _unwrap(t, out)

    def left_limit(self, t):
        t_arr = _as_array(t)
        times, values = self._arrays
        if self.interp == "step":
            idx = np.searchsorted(times, t_arr, side="left") - 1
            out = np.where(idx < 0, 0.0, values[np.maximum(idx, 0)])
        else:
            out = np.where(t_arr <= 0, 0.0, np.interp(t_arr, times, values))
        return _unwrap(t, out)

    def quantile(self, u):
        u_arr = _as_array(u)
        times, values = self._arrays
        idx = np.searchsorted(values, u_arr, side="left")
        beyond = idx >= len(values)
        safe = np.minimum(idx, len(values) - 1)
        if self.interp == "step":
            out = times[safe]
        else:
            lo = np.maximum(safe - 1, 0)
            span = values[safe] - values[lo]
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(span > 0, (u_arr - values[lo]) / span, 0.0)
            out = np.where(safe == 0, 0.0, times[lo] + frac * (times[safe] - times[lo]))
        out = np.where(beyond, INFINITY, out)
        out = np.where(u_arr <= 0, 0.0, out)
        return _unwrap(u, out)

    @property
    def mass_at_infinity(self) -> float:
        return 1.0 - self.values[-1]

    def to_json(self) -> dict:
        return {"kind": "tabulated", "times": list(self.times), "cdf": list(self.values), "interp": self.interp}


def curve_from_json(block: dict) -> DefaultCurve:
    """Build a curve from its JSON config block."""
    kind = block.get("kind")
    if kind == "reduced_form":
        hazard = block["hazard"]
        return ReducedFormCurve(tuple(h["until"] for h in hazard), tuple(h["lambda"] for h in hazard))
    if kind == "merton":
        return MertonCurve(block["sigma"], block["theta"], block["barrier"])
    if kind == "tabulated":
        curve = TabulatedCurve(tuple(block["times"]), tuple(block["cdf"]), block.get("interp", "step"))
        if "mass_at_infinity" in block and abs(block["mass_at_infinity"] - curve.mass_at_infinity) > 1e-12:
            raise InvalidParameter("tabulated 'mass_at_infinity' disagrees with 1 − last CDF value")
        return curve
    raise InvalidParameter(f"unknown curve kind {kind!r}")


def cdf(curve: DefaultCurve, t):
    return curve.cdf(t)


def cdf_left_limit(curve: DefaultCurve, t):
    return curve.left_limit(t)


def sample_default_time(curve: DefaultCurve, stream: np.random.Generator) -> float:
    """Inverse-CDF draw; returns ``math.inf`` for the atom at infinity."""
    return float(curve.quantile(stream.random()))


# --- assumptions ------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    f_t_minus: float
    ig_ok: bool
    density_ok: bool
    chebychev_bound: Optional[float]

    @property
    def ok(self) -> bool:
        return self.ig_ok and self.density_ok


DENSITY_PROBE_LEVELS = 10


def validate_assumptions(curve: DefaultCurve, alpha: float, t_expiry: float, pool_size: int) -> AssumptionReport:
    """Check the investment-grade and no-flat-before-expiry conditions.

    The density check probes F(T−) − F(T − T/2^k) > 0 for k = 1..10.  The
    Chebychev bound is F(T−)(1 − F(T−)) / (N (α − F(T−))²) for the
    independent homogeneous pool.
    """
    if not 0 < alpha < 1:
        raise InvalidParameter(f"attachment alpha must lie in (0, 1); got {alpha!r}")
    if not t_expiry > 0:
        raise InvalidParameter(f"expiry must be positive; got {t_expiry!r}")
    if pool_size < 1:
        raise InvalidParameter("pool size must be at least 1")
    f_minus = float(curve.left_limit(t_expiry))
    ig_ok = alpha > f_minus
    probes = t_expiry - t_expiry / 2.0 ** np.arange(1, DENSITY_PROBE_LEVELS + 1)
    density_ok = bool(np.all(f_minus - np.asarray(curve.cdf(probes)) > 0))
    bound = None
    if ig_ok:
        bound = f_minus * (1 - f_minus) / pool_size / (alpha - f_minus) ** 2
    return AssumptionReport(f_minus, ig_ok, density_ok, bound)


# --- CDS legs and flat-hazard calibration -----------------------------------


def cds_legs(curve: DefaultCurve, payment_dates, riskless_rate: float, t_expiry: float) -> tuple[float, float]:
    """Expected protection and premium-annuity legs of a unit CDS.

    protection = ∫_[0,T) e^{−Rs} dF(s) = e^{−RT}F(T−) + R∫_0^T e^{−Rs}F(s)ds,
    annuity = Σ_t e^{−Rt}(1 − F(t)).
    """
    R = riskless_rate
    prot = math.exp(-R * t_expiry) * float(curve.left_limit(t_expiry))
    if R > 0:
        pts = None
        if isinstance(curve, TabulatedCurve):
            pts = [t for t in curve.times if 0 < t < t_expiry] or None
        val, _ = integrate.quad(
            lambda s: math.exp(-R * s) * float(curve.cdf(s)), 0.0, t_expiry, points=pts, epsabs=1e-13, limit=200
        )
        prot += R * val
    dates = np.asarray(payment_dates, dtype=float)
    annuity = float(np.sum(np.exp(-R * dates) * (1.0 - np.asarray(curve.cdf(dates)))))
    return prot, annuity


def _flat_legs(lam: float, dates: np.ndarray, R: float, T: float) -> tuple[float, float]:
    rate = lam + R
    prot = lam * T if rate == 0 else lam / rate * -math.expm1(-rate * T)
    annuity = float(np.sum(np.exp(-rate * dates)))
    return prot, annuity


def flat_cds_spread(lam: float, payment_dates, riskless_rate: float, t_expiry: float) -> float:
    prot, annuity = _flat_legs(lam, np.asarray(payment_dates, dtype=float), riskless_rate, t_expiry)
    return prot / annuity


def calibrate_flat_hazard(
    spread: float, payment_dates: Sequence[float], riskless_rate: float, t_expiry: float
) -> ReducedFormCurve:
    """Constant hazard whose CDS legs have equal expectation at ``spread``.

    Brent's method on λ ∈ (1e−12, 10] followed by a Newton polish.
    """
    dates = np.asarray(payment_dates, dtype=float)
    if not spread > 0 or not math.isfinite(spread):
        raise InvalidParameter(f"spread must be positive; got {spread!r}")
    if dates.size == 0:
        raise InvalidParameter("at least one payment date is required")
    if not t_expiry > 0 or np.any(dates > t_expiry) or np.any(dates < 0):
        raise InvalidParameter("payment dates must lie in [0, t_expiry] with t_expiry > 0")
    if riskless_rate < 0:
        raise InvalidParameter("riskless rate must be nonnegative")

    def residual(lam):
        prot, annuity = _flat_legs(lam, dates, riskless_rate, t_expiry)
        return spread * annuity - prot

    lo, hi = LAMBDA_MIN, LAMBDA_MAX
    if residual(hi) > 0:
        raise NoRoot(
            f"spread {spread!r} exceeds the largest spread {flat_cds_spread(hi, dates, riskless_rate, t_expiry):.6g}"
            f" attainable with hazard ≤ {LAMBDA_MAX}"
        )
    if residual(lo) < 0:
        raise NoRoot(f"spread {spread!r} is below the spread attainable with hazard ≥ {LAMBDA_MIN}")
    lam = optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    with warnings.catch_warnings():
        # Newton may stop at the rounding floor, which is all we ask of it
        warnings.simplefilter("ignore", RuntimeWarning)
        polished = optimize.newton(residual, lam, tol=1e-16, maxiter=20, disp=False)
    if lo < polished <= hi and abs(residual(polished)) <= abs(residual(lam)):
        lam = polished
    return ReducedFormCurve.flat(float(lam))
