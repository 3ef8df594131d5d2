"""Monte Carlo valuation of both tranche legs, plain and exponentially tilted.

Paths are generated in fixed-size blocks.  Block ``b`` draws from its own
Philox stream keyed by ``(seed, b)`` and always generates all
``BLOCK_SIZE`` paths, so path ``p`` is the same regardless of the requested
path count or of how blocks are scheduled across threads.

Within a path only the defaults in [0, T] matter for either leg.  Their count
is drawn first (binomial), then their times are drawn from μ restricted to
[0, T) plus any atom at T, and sorted.  Paths whose count never reaches the
tranche skip the time draws entirely.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidParameter, UndefinedSpread
from .ldp import TiltedMeasure, hbar, kappa as tilt_exponent
from .models import DefaultCurve, validate_assumptions
from .pricer import TrancheSpec, first_loss_count, snap_lattice

BLOCK_SIZE = 1024
THREADS_ENV = "LDPCDO_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InvalidParameter(f"{THREADS_ENV} must be an integer; got {raw!r}") from None
    return os.cpu_count() or 1


def block_stream(seed: int, block: int) -> np.random.Generator:
    """Independent counter-based stream for one block of paths."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


# --- leg valuation ------------------------------------------------------------


def tranche_levels(n: int, tranche: TrancheSpec) -> np.ndarray:
    """L̄ as a function of the default count k = 0..n."""
    k = np.arange(n + 1, dtype=float)
    lo = snap_lattice(n * tranche.alpha)
    hi = snap_lattice(n * tranche.beta)
    return np.clip((k - lo) / (hi - lo), 0.0, 1.0)


def leg_values(window_times: np.ndarray, n: int, tranche: TrancheSpec) -> tuple[np.ndarray, np.ndarray]:
    """Protection and premium leg values for a batch of scenarios.

    ``window_times`` has shape (paths, K): each row holds the sorted times of
    the defaults in [0, T], padded with ``inf``.  The protection leg is the
    Stieltjes sum of e^{−Rs} against the tranched loss over [0, T); the premium
    leg evaluates the right-continuous tranched loss at each payment date.
    """
    times = np.atleast_2d(np.asarray(window_times, dtype=float))
    paths, width = times.shape
    if width > n:
        raise InvalidParameter("more defaults than names in a scenario")
    R, T = tranche.riskless_rate, tranche.t_expiry
    level = tranche_levels(n, tranche)
    increments = np.diff(level)[:width]
    before = times < T
    discount = np.where(before, np.exp(-R * np.where(before, times, 0.0)), 0.0)
    prot = discount @ increments if width else np.zeros(paths)
    prem = np.zeros(paths)
    for t in tranche.payment_dates:
        count = np.count_nonzero(times <= t, axis=1)
        prem += math.exp(-R * t) * (1.0 - level[count])
    return prot, prem


@dataclass(frozen=True)
class Scenario:
    """One draw of the N default times (``inf`` for no default)."""

    default_times: np.ndarray
    t_expiry: float

    @property
    def n(self) -> int:
        return int(self.default_times.size)

    @property
    def defaults_before_T(self) -> int:
        return int(np.count_nonzero(self.default_times < self.t_expiry))

    @property
    def window_order(self) -> np.ndarray:
        """Name indices of the defaults in [0, T], by time then by name index."""
        idx = np.flatnonzero(self.default_times <= self.t_expiry)
        return idx[np.argsort(self.default_times[idx], kind="stable")]

    @property
    def window_times(self) -> np.ndarray:
        return self.default_times[self.window_order]

    def gamma(self, alpha: float) -> float:
        """N(L_{T−} − α)."""
        return self.defaults_before_T - self.n * alpha


def simulate_scenario(
    law: Union[DefaultCurve, TiltedMeasure], n: int, stream: np.random.Generator, t_expiry: Optional[float] = None
) -> Scenario:
    """n independent default times from a curve or from the tilted law."""
    if n < 1:
        raise InvalidParameter("pool size must be at least 1")
    if isinstance(law, TiltedMeasure):
        return Scenario(law.sample(stream, n), law.t_expiry)
    if t_expiry is None:
        raise InvalidParameter("t_expiry is required when sampling from a curve")
    return Scenario(np.asarray(law.quantile(stream.random(n)), dtype=float).reshape(n), float(t_expiry))


def protection_leg_value(scenario: Scenario, tranche: TrancheSpec) -> float:
    prot, _ = leg_values(scenario.window_times[None, :], scenario.n, tranche)
    return float(prot[0])


def premium_leg_value(scenario: Scenario, tranche: TrancheSpec) -> float:
    _, prem = leg_values(scenario.window_times[None, :], scenario.n, tranche)
    return float(prem[0])


# --- path engine --------------------------------------------------------------


@dataclass
class PathResults:
    """Per-path outputs ordered by path index."""

    defaults_before_T: np.ndarray
    prot: np.ndarray
    prem: np.ndarray
    weight: np.ndarray
    first_loss_time: np.ndarray
    mode: str
    log_scale: float = 0.0

    def __len__(self) -> int:
        return self.prot.size


@dataclass(frozen=True)
class _PathModel:
    curve: DefaultCurve
    tranche: TrancheSpec
    n: int
    mode: str
    f_minus: float
    q_before: float
    p_at_expiry: float
    k_star: int
    kappa: float


def _path_model(curve: DefaultCurve, tranche: TrancheSpec, n: int, mode: str) -> _PathModel:
    if n < 1:
        raise InvalidParameter("pool size must be at least 1")
    if mode not in ("plain", "tilted"):
        raise InvalidParameter(f"unknown simulation mode {mode!r}")
    T = tranche.t_expiry
    f_minus = float(curve.left_limit(T))
    atom = float(curve.cdf(T)) - f_minus
    p_at = atom / (1.0 - f_minus) if f_minus < 1.0 else 0.0
    k = 0.0
    q = f_minus
    if mode == "tilted":
        k = tilt_exponent(tranche.alpha, f_minus)
        q = tranche.alpha
    return _PathModel(curve, tranche, n, mode, f_minus, q, min(max(p_at, 0.0), 1.0), first_loss_count(n, tranche.alpha), k)


def _run_block(model: _PathModel, seed: int, block: int) -> tuple:
    rng = block_stream(seed, block)
    size, n, T = BLOCK_SIZE, model.n, model.tranche.t_expiry
    before = rng.binomial(n, model.q_before, size)
    at_expiry = rng.binomial(n - before, model.p_at_expiry) if model.p_at_expiry > 0 else np.zeros(size, dtype=np.int64)
    total = before + at_expiry
    active = np.flatnonzero(total >= model.k_star)
    width = int(total[active].max()) if active.size else 0
    times = np.full((active.size, width), np.inf)
    if active.size:
        u = rng.random((active.size, width))
        drawn = np.asarray(model.curve.quantile(model.f_minus * (1.0 - u)), dtype=float)
        col = np.arange(width)[None, :]
        k1 = before[active][:, None]
        times = np.where(col < k1, drawn, np.where(col < total[active][:, None], T, np.inf))
        times.sort(axis=1)
    prot = np.zeros(size)
    prem = np.full(size, model.tranche.annuity)
    first_loss = np.full(size, np.nan)
    if active.size:
        p_act, q_act = leg_values(times, n, model.tranche)
        prot[active] = p_act
        prem[active] = q_act
        first_loss[active] = times[:, model.k_star - 1]
    if model.mode == "tilted":
        hit = before >= model.k_star
        gamma = before - n * model.tranche.alpha
        weight = np.where(hit, np.exp(-model.kappa * np.where(hit, gamma, 0.0)), 0.0)
    else:
        weight = np.ones(size)
    first_loss = np.where(before >= model.k_star, first_loss, np.nan)
    return before, prot, prem, weight, first_loss


def simulate_paths(
    curve: DefaultCurve, tranche: TrancheSpec, n: int, n_paths: int, seed: int, mode: str = "plain"
) -> PathResults:
    """Run ``n_paths`` scenarios and return per-path leg values and weights.

    In tilted mode ``weight`` is e^{−κγ_N}·1{γ_N>0}, so that
    mean(prot·weight)·e^{log_scale} estimates E[P^prot] with
    log_scale = −N·ℏ(α, F(T−)).
    """
    if n_paths < 1:
        raise InvalidParameter("need at least one path")
    model = _path_model(curve, tranche, n, mode)
    blocks = -(-n_paths // BLOCK_SIZE)
    workers = min(thread_count(), blocks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_block(model, seed, b), range(blocks)))
    else:
        parts = [_run_block(model, seed, b) for b in range(blocks)]
    arrays = [np.concatenate(col)[:n_paths] for col in zip(*parts)]
    log_scale = -n * hbar(tranche.alpha, model.f_minus) if mode == "tilted" else 0.0
    return PathResults(*arrays, mode=mode, log_scale=log_scale)


# --- estimators -----------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    """Sample mean and standard error; the estimated quantity is
    ``mean · exp(log_scale)``."""

    mean: float
    std_error: float
    n_paths: int
    seed: int
    mode: str
    log_scale: float = 0.0

    @property
    def value(self) -> float:
        return self.mean * math.exp(self.log_scale)

    @property
    def value_std_error(self) -> float:
        return self.std_error * math.exp(self.log_scale)

    @property
    def log_value(self) -> float:
        return math.log(self.mean) + self.log_scale if self.mean > 0 else -math.inf

    @property
    def log10_value(self) -> float:
        return self.log_value / math.log(10.0)

    @property
    def relative_error(self) -> float:
        return self.std_error / self.mean if self.mean > 0 else math.inf

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "mode": self.mode,
            "log_scale": self.log_scale,
            "value": self.value,
            "log10_value": self.log10_value,
            "relative_error": self.relative_error,
        }


def _estimate(x: np.ndarray, seed: int, mode: str, log_scale: float = 0.0) -> Estimate:
    m = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return Estimate(mean, se, m, seed, mode, log_scale)


@dataclass(frozen=True)
class MCPrice:
    prot: Estimate
    prem: Estimate
    spread: float
    spread_std_error: float

    def __iter__(self):
        return iter((self.prot, self.prem, self.spread))


def price_from_paths(paths: PathResults, seed: int) -> MCPrice:
    prot = _estimate(paths.prot, seed, "plain")
    prem = _estimate(paths.prem, seed, "plain")
    if prem.mean == 0:
        raise UndefinedSpread("premium leg has zero expectation; the spread is undefined")
    spread = prot.mean / prem.mean
    m = len(paths)
    cov = np.cov(paths.prot, paths.prem, ddof=1)
    # delta method for the ratio of means
    var = (cov[0, 0] - 2 * spread * cov[0, 1] + spread**2 * cov[1, 1]) / (m * prem.mean**2)
    return MCPrice(prot, prem, spread, math.sqrt(max(var, 0.0)))


def mc_price(curve: DefaultCurve, tranche: TrancheSpec, n: int, n_paths: int, seed: int) -> MCPrice:
    """Plain Monte Carlo estimates of both legs and the fair spread."""
    if n_paths < 2:
        raise InvalidParameter("need at least two paths for a standard error")
    return price_from_paths(simulate_paths(curve, tranche, n, n_paths, seed, "plain"), seed)


def _tilted_checks(curve: DefaultCurve, tranche: TrancheSpec, n: int) -> None:
    report = validate_assumptions(curve, tranche.alpha, tranche.t_expiry, n)
    if not report.ig_ok:
        tilt_exponent(tranche.alpha, report.f_t_minus)  # raises with the failed inequality
    if not report.density_ok:
        warnings.warn("F is flat immediately before expiry; the asymptotic regime may not apply", stacklevel=3)


def is_estimate(paths: PathResults, seed: int) -> Estimate:
    return _estimate(paths.prot * paths.weight, seed, "tilted", paths.log_scale)


def is_price(curve: DefaultCurve, tranche: TrancheSpec, n: int, n_paths: int, seed: int) -> Estimate:
    """Importance-sampled E[P^prot_N] under the exponentially tilted law.

    ``mean`` estimates I_N = Ẽ[P^prot e^{−κγ_N} 1{γ_N>0}] and ``log_scale`` is
    −N·ℏ(α, F(T−)), so ``value`` is the price itself.
    """
    if n_paths < 2:
        raise InvalidParameter("need at least two paths for a standard error")
    _tilted_checks(curve, tranche, n)
    return is_estimate(simulate_paths(curve, tranche, n, n_paths, seed, "tilted"), seed)


def default_bucket_count(n: int) -> int:
    return max(5, int(math.floor(n**0.25)))


def diagnostics_from_paths(paths: PathResults, tranche: TrancheSpec, n: int, buckets: Optional[int] = None) -> dict:
    """Conditional statistics of the tilted paths, bucketed by γ_N = s > 0."""
    alpha, T, R = tranche.alpha, tranche.t_expiry, tranche.riskless_rate
    k_star = first_loss_count(n, alpha)
    count = default_bucket_count(n) if buckets is None else buckets
    m = len(paths)
    local_clt = math.sqrt(2 * math.pi * n * alpha * (1 - alpha))
    report = {}
    for j in range(count):
        k = k_star + j
        sel = paths.defaults_before_T == k
        hits = int(np.count_nonzero(sel))
        if hits == 0:
            continue
        s = k - n * alpha
        prot_mean = float(np.mean(paths.prot[sel]))
        pmf = hits / m
        report[f"{s:.12g}"] = {
            "s": s,
            "defaults_before_T": k,
            "hits": hits,
            "prot_mean": prot_mean,
            "prot_ratio": prot_mean / (math.exp(-R * T) * s / (tranche.width * n)),
            "mean_time_to_expiry": float(np.mean(T - paths.first_loss_time[sel])),
            "pmf": pmf,
            "pmf_ratio": pmf * local_clt,
        }
    return {
        "n": n,
        "alpha": alpha,
        "n_paths": m,
        "tilted_default_fraction": float(np.mean(paths.defaults_before_T)) / n,
        "buckets": report,
    }


def tilt_diagnostics(
    curve: DefaultCurve, tranche: TrancheSpec, n: int, n_paths: int, seed: int, buckets: Optional[int] = None
) -> dict:
    """Tilted-law statistics behind the asymptotic prefactor.

    For each bucket s = γ_N: the conditional protection payoff against
    e^{−RT}s/((β−α)N), the conditional mean of T − τ^α_N, and the bucket
    frequency against 1/√(2πNα(1−α)).  Empty buckets are omitted.
    """
    _tilted_checks(curve, tranche, n)
    paths = simulate_paths(curve, tranche, n, n_paths, seed, "tilted")
    return diagnostics_from_paths(paths, tranche, n, buckets)
