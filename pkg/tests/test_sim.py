import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ldpcdo.errors import AssumptionViolated, UndefinedSpread
from ldpcdo.ldp import kappa, tilted_split
from ldpcdo.models import ReducedFormCurve, TabulatedCurve
from ldpcdo.oracle import binomial_pmf
from ldpcdo.pricer import TrancheSpec, quarterly_dates
from ldpcdo.sim import (
    Scenario,
    is_price,
    leg_values,
    mc_price,
    premium_leg_value,
    protection_leg_value,
    simulate_paths,
    simulate_scenario,
    tilt_diagnostics,
)


def curve_with(f, T):
    return ReducedFormCurve.flat(-math.log1p(-f) / T)


HAND = TrancheSpec(0.25, 0.75, 1.0, (1.0,), 0.0)


class TestLegs:
    def test_hand_example(self):
        sc = Scenario(np.array([0.5, 1.5]), 1.0)
        assert protection_leg_value(sc, HAND) == 0.5
        assert premium_leg_value(sc, HAND) == 0.5

    def test_no_defaults(self):
        tr = TrancheSpec.quarterly(0.1, 0.2, 2.0, 0.05)
        sc = Scenario(np.full(10, np.inf), 2.0)
        assert protection_leg_value(sc, tr) == 0.0
        assert premium_leg_value(sc, tr) == pytest.approx(tr.annuity, rel=1e-15)

    def test_wipeout_at_zero(self):
        tr = TrancheSpec.quarterly(0.1, 0.2, 2.0, 0.0)
        sc = Scenario(np.zeros(10), 2.0)
        assert protection_leg_value(sc, tr) == pytest.approx(1.0, rel=1e-15)
        assert premium_leg_value(sc, tr) == 0.0

    def test_default_at_expiry_is_not_protected(self):
        sc = Scenario(np.array([1.0, 1.0]), 1.0)
        assert protection_leg_value(sc, HAND) == 0.0
        # but the payment date at T sees it
        assert premium_leg_value(sc, HAND) == 0.0

    def test_discounting_per_jump(self):
        tr = TrancheSpec(0.0, 1.0, 4.0, (4.0,), 0.1)
        sc = Scenario(np.array([1.0, 3.0, 9.0, np.inf]), 4.0)
        assert protection_leg_value(sc, tr) == pytest.approx(0.25 * (math.exp(-0.1) + math.exp(-0.3)), rel=1e-15)

    def test_tie_order_fixed_by_name(self):
        sc = Scenario(np.array([0.7, 0.3, 0.7, 5.0]), 1.0)
        assert sc.window_order.tolist() == [1, 0, 2]

    @given(
        st.lists(st.floats(0.0, 3.0), min_size=1, max_size=12),
        st.floats(0.0, 2.0),
        st.floats(0.0, 0.5),
        st.floats(0.05, 0.5),
    )
    def test_bounds_and_monotonicity(self, times, extra, alpha, width):
        T = 2.0
        tr = TrancheSpec(alpha, min(1.0, alpha + width), T, quarterly_dates(T), 0.04)
        n = len(times) + 1
        base = np.array(times + [np.inf])
        more = np.array(times + [extra])
        s0, s1 = Scenario(base, T), Scenario(more, T)
        p0, p1 = protection_leg_value(s0, tr), protection_leg_value(s1, tr)
        k_star = math.floor(round(n * alpha, 9)) + 1
        assert 0.0 <= p0 <= (1.0 if s0.defaults_before_T >= k_star else 0.0)
        assert p1 >= p0 - 1e-15
        assert premium_leg_value(s1, tr) <= premium_leg_value(s0, tr) + 1e-15
        assert 0 <= premium_leg_value(s0, tr) <= tr.annuity + 1e-12

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        tr = TrancheSpec.quarterly(0.1, 0.3, 3.0, 0.02)
        rows = np.sort(rng.uniform(0, 3.5, (50, 20)), axis=1)
        rows[rows > 3.0] = np.inf
        prot, prem = leg_values(rows, 20, tr)
        for i in (0, 17, 49):
            sc = Scenario(rows[i], 3.0)
            assert prot[i] == protection_leg_value(sc, tr)
            assert prem[i] == premium_leg_value(sc, tr)


class TestScenario:
    def test_all_mass_after_expiry(self):
        curve = TabulatedCurve((0.0, 2.0), (0.0, 1.0))
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert simulate_scenario(curve, 30, rng, t_expiry=1.0).defaults_before_T == 0

    def test_tilted_fraction(self):
        tm = tilted_split(curve_with(0.03, 5.0), 0.1, 5.0)
        rng = np.random.default_rng(2)
        counts = [simulate_scenario(tm, 10_000, rng).defaults_before_T for _ in range(1000)]
        assert abs(np.mean(counts) / 10_000 - 0.1) <= 3 * math.sqrt(0.09 / 1e7)

    def test_reproducible(self):
        curve = curve_with(0.1, 2.0)
        a = simulate_scenario(curve, 50, np.random.default_rng(9), t_expiry=2.0)
        b = simulate_scenario(curve, 50, np.random.default_rng(9), t_expiry=2.0)
        assert a.default_times.tobytes() == b.default_times.tobytes()

    def test_gamma(self):
        sc = Scenario(np.array([0.1, 0.2, 0.3, 0.4, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0]), 1.0)
        assert sc.gamma(0.3) == pytest.approx(1.0)


class TestPlainMC:
    tr = TrancheSpec.quarterly(0.12, 0.2, 5.0, 0.03)

    def test_no_risk_before_expiry(self):
        curve = TabulatedCurve((0.0, 6.0), (0.0, 0.5))
        prot, prem, spread = mc_price(curve, self.tr, 50, 1000, seed=1)
        assert prot.mean == 0.0 and spread == 0.0
        assert prem.mean == pytest.approx(self.tr.annuity, rel=1e-14)

    def test_standard_error_scaling(self):
        curve = curve_with(0.08, 5.0)
        a = mc_price(curve, self.tr, 50, 100_000, seed=3).prot.std_error
        b = mc_price(curve, self.tr, 50, 200_000, seed=3).prot.std_error
        assert a / b == pytest.approx(math.sqrt(2), rel=0.10)

    def test_undefined_spread(self):
        wipeout = TabulatedCurve((0.0,), (1.0,))
        with pytest.raises(UndefinedSpread):
            mc_price(wipeout, TrancheSpec(0.1, 0.2, 1.0, (1.0,), 0.0), 10, 100, seed=0)

    def test_prefix_and_thread_invariance(self, monkeypatch):
        curve = curve_with(0.08, 5.0)
        monkeypatch.setenv("LDPCDO_THREADS", "1")
        one = simulate_paths(curve, self.tr, 50, 5000, seed=4)
        monkeypatch.setenv("LDPCDO_THREADS", "4")
        four = simulate_paths(curve, self.tr, 50, 5000, seed=4)
        longer = simulate_paths(curve, self.tr, 50, 9000, seed=4)
        assert one.prot.tobytes() == four.prot.tobytes()
        assert one.prem.tobytes() == four.prem.tobytes()
        assert one.prot.tobytes() == longer.prot[:5000].tobytes()
        assert mc_price(curve, self.tr, 50, 5000, 4).prot == mc_price(curve, self.tr, 50, 5000, 4).prot

    def test_premium_tends_to_annuity(self):
        curve = curve_with(0.05, 5.0)
        tr = TrancheSpec.quarterly(0.1, 0.15, 5.0, 0.03)
        gaps = [abs(mc_price(curve, tr, n, 20_000, seed=5).prem.mean / tr.annuity - 1) for n in (20, 100, 500)]
        assert gaps[0] > gaps[1] > gaps[2]


class TestTilted:
    def test_weight_for_single_excess_default(self):
        T = 1.0
        curve = curve_with(0.1, T)
        tr = TrancheSpec(0.3, 0.6, T, (T,), 0.0)
        paths = simulate_paths(curve, tr, 10, 20_000, seed=6, mode="tilted")
        k = kappa(0.3, 0.1)
        sel = paths.defaults_before_T == 4
        assert sel.any()
        assert np.allclose(paths.weight[sel], math.exp(-k), rtol=1e-14)
        assert np.all(paths.weight[paths.defaults_before_T <= 3] == 0.0)

    def test_matches_plain(self):
        curve = curve_with(0.08, 5.0)
        tr = TrancheSpec.quarterly(0.12, 0.2, 5.0, 0.03)
        plain = mc_price(curve, tr, 50, 200_000, seed=7).prot
        tilted = is_price(curve, tr, 50, 50_000, seed=8)
        assert abs(plain.value - tilted.value) <= 3 * math.hypot(plain.value_std_error, tilted.value_std_error)

    def test_log_reporting(self):
        curve = curve_with(0.03, 5.0)
        tr = TrancheSpec.quarterly(0.1, 0.2, 5.0, 0.0)
        est = is_price(curve, tr, 20_000, 2048, seed=9)
        assert est.value == 0.0
        assert math.isfinite(est.log10_value)
        assert 0 < est.relative_error < 1.0

    def test_requires_investment_grade(self):
        with pytest.raises(AssumptionViolated):
            is_price(curve_with(0.2, 1.0), TrancheSpec(0.1, 0.2, 1.0, (1.0,)), 50, 100, seed=0)

    def test_flat_curve_warns(self):
        curve = TabulatedCurve.from_atoms([(0.5, 0.03)])
        with pytest.warns(UserWarning):
            is_price(curve, TrancheSpec(0.1, 0.2, 1.0, (1.0,)), 50, 100, seed=0)


class TestDiagnostics:
    tr = TrancheSpec.quarterly(0.1, 0.15, 5.0, 0.03)
    curve = curve_with(0.05, 5.0)

    def test_bucket_pmf_matches_exact(self):
        n, m = 2000, 50_000
        d = tilt_diagnostics(self.curve, self.tr, n, m, seed=10)
        assert abs(d["tilted_default_fraction"] - 0.1) < 4 * math.sqrt(0.09 / (n * m))
        for row in d["buckets"].values():
            p = float(binomial_pmf(n, 0.1, row["defaults_before_T"]))
            assert abs(row["pmf"] - p) <= 4 * math.sqrt(p * (1 - p) / m)
            assert row["s"] > 0

    def test_empty_buckets_absent(self):
        d = tilt_diagnostics(self.curve, self.tr, 2000, 1024, seed=11, buckets=60)
        assert all(v["hits"] > 0 for v in d["buckets"].values())
        assert len(d["buckets"]) < 60

    def test_time_to_expiry_shrinks(self):
        means = []
        for n in (500, 2000, 8000):
            d = tilt_diagnostics(self.curve, self.tr, n, 20_000, seed=12, buckets=3)
            rows = d["buckets"].values()
            hits = sum(r["hits"] for r in rows)
            means.append(sum(r["mean_time_to_expiry"] * r["hits"] for r in rows) / hits)
        assert means[0] > means[1] > means[2]
