import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldpcdo.errors import AssumptionViolated, InvalidParameter, NonUniqueMinimizer
from ldpcdo.ldp import hbar, kappa
from ldpcdo.pricer import (
    MixtureStates,
    TrancheSpec,
    dominant_state,
    gaussian_copula_states,
    granularity,
    log_theoretical_price_star,
    mixture_protection_asymptotic,
    protection_leg_asymptotic,
    quarterly_dates,
    spread_asymptotic,
    star_prefactor,
    std_normal_cdf,
    std_normal_ppf,
    std_normal_sf,
    theoretical_price_star,
    tilted_geometric_sum,
)

# mpmath, 40 digits (worked example: n=100, α=0.1, β=0.2, R=0, F(T−)=0.03)
EXAMPLE_PREFACTOR = 0.013298076013381089
EXAMPLE_EXPONENT = 5.2986103076787620
EXAMPLE_VALUE = 3.5528020529430019e-5
EXAMPLE_BRACKET = 0.53448979591836735
PHI_1_96 = 0.97500210485177956

EXAMPLE = TrancheSpec(0.1, 0.2, 1.0, (1.0,), 0.0)


class TestGranularity:
    def test_examples(self):
        assert granularity(100, 0.1) == 0.0
        assert granularity(103, 0.1) == pytest.approx(0.7, abs=1e-12)
        assert granularity(7, 1 / 3) == pytest.approx(float(Fraction(3) - Fraction(7, 3)), abs=1e-12)

    @given(st.integers(1, 10**6), st.integers(1, 999))
    def test_integer_lattice_is_exact(self, n, milli):
        a = milli / 1000
        if (n * milli) % 1000 == 0:
            assert granularity(n, a) == 0.0
        else:
            exact = math.ceil(Fraction(n * milli, 1000)) - Fraction(n * milli, 1000)
            assert granularity(n, a) == pytest.approx(float(exact), abs=1e-9)


class TestProtectionAsymptotic:
    def test_worked_example(self):
        p = protection_leg_asymptotic(100, EXAMPLE, 0.03)
        assert p.prefactor == pytest.approx(EXAMPLE_PREFACTOR, rel=1e-14)
        assert p.granularity == 0.0
        assert p.bracket == pytest.approx(EXAMPLE_BRACKET, rel=1e-14)
        assert p.exponent == pytest.approx(EXAMPLE_EXPONENT, rel=1e-14)
        assert p.value == pytest.approx(EXAMPLE_VALUE, rel=1e-13)

    @given(st.integers(1, 100_000), st.floats(0.02, 0.4), st.floats(0.05, 0.95))
    def test_decomposition(self, n, alpha, frac):
        f = alpha * frac
        tr = TrancheSpec(alpha, min(1.0, alpha + 0.1), 3.0, (1.0, 2.0, 3.0), 0.02)
        p = protection_leg_asymptotic(n, tr, f)
        assert p.value >= 0
        if p.value > 1e-300:
            rebuilt = p.prefactor * math.exp(-p.kappa * p.granularity) * p.bracket * math.exp(-p.exponent)
            assert rebuilt == pytest.approx(p.value, rel=1e-12)
        assert p.log_value == pytest.approx(
            math.log(p.prefactor) - p.kappa * p.granularity + math.log(p.bracket) - p.exponent, rel=1e-14
        )

    def test_bracket_reduces_when_lattice_exact(self):
        for n in (100, 200, 1000):
            p = protection_leg_asymptotic(n, EXAMPLE, 0.03)
            k = kappa(0.1, 0.03)
            assert p.bracket == pytest.approx(math.exp(-k) / (-math.expm1(-k)) ** 2, rel=1e-12)

    def test_scaled_value_stays_in_sawtooth_envelope(self):
        k = kappa(0.1, 0.03)
        q = -math.expm1(-k)
        lo = min(math.exp(-k * g) * (math.exp(-k) / q**2 + g / q) for g in np.linspace(0, 1, 1001))
        hi = max(math.exp(-k * g) * (math.exp(-k) / q**2 + g / q) for g in np.linspace(0, 1, 1001))
        scale = 1 / (0.1 * math.sqrt(2 * math.pi * 0.09))
        for n in np.unique(np.logspace(2, 5, 60).astype(int)):
            p = protection_leg_asymptotic(int(n), EXAMPLE, 0.03)
            scaled = math.exp(p.log_value + p.exponent) * n**1.5 / scale
            assert lo * (1 - 1e-9) <= scaled <= hi * (1 + 1e-9)

    def test_underflow_kept_in_log_space(self):
        p = protection_leg_asymptotic(200_000, EXAMPLE, 0.03)
        assert p.value == 0.0
        assert math.isfinite(p.log_value) and p.log10_value < -4000

    def test_assumption(self):
        with pytest.raises(AssumptionViolated):
            protection_leg_asymptotic(100, EXAMPLE, 0.1)


class TestSpread:
    def test_divisors(self):
        tr = TrancheSpec.quarterly(0.1, 0.2, 5.0)
        assert tr.annuity == 20.0
        s = spread_asymptotic(100, tr, 0.03)
        assert s.value * 20 == pytest.approx(protection_leg_asymptotic(100, tr, 0.03).value, rel=1e-15)
        assert spread_asymptotic(100, EXAMPLE, 0.03).value == protection_leg_asymptotic(100, EXAMPLE, 0.03).value

    def test_identity_with_rate(self):
        tr = TrancheSpec.quarterly(0.1, 0.2, 5.0, 0.04)
        s, p = spread_asymptotic(300, tr, 0.03), protection_leg_asymptotic(300, tr, 0.03)
        assert s.value * tr.annuity == pytest.approx(p.value, rel=1e-14)


class TestPriceStar:
    def test_removed_prefactor(self):
        tr = TrancheSpec.quarterly(0.1, 0.25, 5.0, 0.03)
        for n in (150, 200, 207):
            star = theoretical_price_star(n, 0.1, 0.03)
            assert star * star_prefactor(tr) == pytest.approx(spread_asymptotic(n, tr, 0.03).value, rel=1e-12)

    def test_positive_finite(self):
        v = theoretical_price_star(200, 0.1, 0.03)
        assert 0 < v < math.inf

    def test_jumps_only_at_lattice_steps(self):
        alpha, f = 0.1, 0.03
        ns = np.arange(50, 400)
        logs = np.array([log_theoretical_price_star(int(n), alpha, f) for n in ns])
        # the same lattice count continued one step: smooth part of the next value
        for i, n in enumerate(ns[:-1]):
            c = math.ceil(round(n * alpha, 9))
            c_next = math.ceil(round((n + 1) * alpha, 9))
            g_cont = c - (n + 1) * alpha
            cont = (
                -kappa(alpha, f) * g_cont
                - 1.5 * math.log(n + 1)
                - 0.5 * math.log(alpha * (1 - alpha))
                + math.log(alpha * (1 - alpha) * f * (1 - f) / (alpha - f) ** 2 + g_cont * alpha * (1 - f) / (alpha - f))
                - (n + 1) * hbar(alpha, f)
            )
            jump = logs[i + 1] - cont
            if c_next == c:
                assert abs(jump) < 1e-9
            else:
                assert abs(jump) > 1e-3


class TestGeometricSum:
    @pytest.mark.parametrize("n", [16, 100, 10_000])
    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.137])
    @pytest.mark.parametrize("k", [0.2, 0.7, 1.5, 3.0])
    def test_bound(self, n, alpha, k):
        trunc, closed, bound = tilted_geometric_sum(n, alpha, k)
        assert abs(trunc - closed) <= max(bound, 1e-14)

    def test_large_kappa_dominant_term(self):
        trunc, _, _ = tilted_geometric_sum(100, 0.1, 8.0)
        assert trunc == pytest.approx(math.exp(-8.0), rel=1e-3)

    def test_zero_granularity_closed_form(self):
        k = 1.1
        _, closed, _ = tilted_geometric_sum(100, 0.1, k)
        assert closed == pytest.approx(math.exp(-k) / (-math.expm1(-k)) ** 2, rel=1e-15)

    def test_direct_summation(self):
        # n=10^4, α=0.10373: nα = 1037.3, so s runs over 0.7+j with 0.7+j ≤ 10
        k = 0.9
        trunc, _, _ = tilted_geometric_sum(10_000, 0.10373, k)
        direct = math.fsum((0.7 + j) * math.exp(-k * (0.7 + j)) for j in range(10))
        assert trunc == pytest.approx(direct, rel=1e-10)

    def test_bad_kappa(self):
        with pytest.raises(InvalidParameter):
            tilted_geometric_sum(100, 0.1, 0.0)


class TestMixture:
    tr = TrancheSpec.quarterly(0.1, 0.2, 5.0, 0.03)

    def test_single_state_bitwise(self):
        m = mixture_protection_asymptotic(400, self.tr, MixtureStates.from_pairs([(1.0, 0.04)]))
        assert m == protection_leg_asymptotic(400, self.tr, 0.04).value

    def test_duplicate_states(self):
        m = mixture_protection_asymptotic(400, self.tr, MixtureStates.from_pairs([(0.5, 0.04), (0.5, 0.04)]))
        assert m == pytest.approx(protection_leg_asymptotic(400, self.tr, 0.04).value, rel=1e-15)

    def test_dominated_by_riskier_state(self):
        states = MixtureStates.from_pairs([(0.5, 0.02), (0.5, 0.05)])
        total = mixture_protection_asymptotic(400, self.tr, states)
        top = 0.5 * protection_leg_asymptotic(400, self.tr, 0.05).value
        assert top == pytest.approx(total, rel=0.01)
        dom = dominant_state(states, 0.1, 400, self.tr)
        assert dom.index == 1
        assert dom.approximation == top

    def test_dominant_single_and_tie(self):
        assert dominant_state(MixtureStates.from_pairs([(1.0, 0.03)]), 0.1).index == 0
        with pytest.raises(NonUniqueMinimizer):
            dominant_state(MixtureStates.from_pairs([(0.5, 0.04), (0.5, 0.04)]), 0.1)

    def test_offending_state_named(self):
        with pytest.raises(AssumptionViolated, match="state 1"):
            mixture_protection_asymptotic(100, self.tr, MixtureStates.from_pairs([(0.5, 0.02), (0.5, 0.15)]))

    def test_weights_validated(self):
        with pytest.raises(InvalidParameter):
            MixtureStates.from_pairs([(0.5, 0.02), (0.4, 0.03)])


class TestNormal:
    def test_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(1.96) == pytest.approx(PHI_1_96, rel=1e-15)
        assert std_normal_sf(-1.96) == pytest.approx(PHI_1_96, rel=1e-15)

    def test_round_trip(self):
        x = np.linspace(-8, 5, 2001)
        assert np.max(np.abs(std_normal_ppf(std_normal_cdf(x)) - x)) <= 1e-10
        # the upper tail is only representable through the complement
        x = np.linspace(0, 8, 801)
        assert np.max(np.abs(-std_normal_ppf(std_normal_sf(x)) - x)) <= 1e-10

    def test_extreme_inverse(self):
        assert std_normal_cdf(std_normal_ppf(1e-300)) == pytest.approx(1e-300, rel=1e-12)
        with pytest.raises(InvalidParameter):
            std_normal_ppf(1.0)
        with pytest.raises(InvalidParameter):
            std_normal_ppf(0.0)


class TestCopula:
    def test_weights(self):
        for m in (1, 4, 8, 16):
            st_ = gaussian_copula_states(0.05, 0.3, m)
            assert np.all(st_.weights >= 0)
            assert abs(math.fsum(st_.weights) - 1) <= 1e-14
            assert len(st_) == 2 * m * m + 1

    def test_weakly_correlated_collapses(self):
        st_ = gaussian_copula_states(0.05, 1e-12, 6)
        assert np.max(np.abs(st_.levels - 0.05)) <= 1e-10

    def test_total_probability_improves(self):
        errs = []
        for m in (4, 8, 16):
            st_ = gaussian_copula_states(0.05, 0.3, m)
            errs.append(abs(math.fsum(st_.weights * st_.levels) - 0.05))
        assert errs[0] > errs[1] > errs[2]

    @pytest.mark.parametrize("rho", [0.0, 1.0, -0.2])
    def test_rejects_rho(self, rho):
        with pytest.raises(InvalidParameter):
            gaussian_copula_states(0.05, rho, 4)

    def test_quarterly_dates(self):
        assert quarterly_dates(1.0) == (0.25, 0.5, 0.75, 1.0)
        assert quarterly_dates(0.6) == (0.25, 0.5, 0.6)
