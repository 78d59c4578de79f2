import math

import numpy as np
import pytest

from regenbound import (DelaySpec, Exponential, SpecError, Uniform, validate)
from regenbound.coupling import sample_tau
from regenbound.empirics import (TvCurve, coupling_inequality_check,
                                 empirical_tv, ks_statistic, tv_curve,
                                 verify_curve)
from regenbound.streams import Slot, UniformStream


class TestKsStatistic:
    def test_stratified_sample_is_optimal(self):
        n = 1000
        samples = Uniform(0, 1).quantile_array((np.arange(1, n + 1) - 0.5) / n)
        ks = ks_statistic(samples, Uniform(0, 1))
        assert abs(ks.statistic - 0.5 / n) < 1e-12
        assert ks.crit_1pct == pytest.approx(1.63 / math.sqrt(n))
        assert ks.crit_5pct == pytest.approx(1.36 / math.sqrt(n))

    def test_inverse_transform_sample_passes(self):
        e = Exponential(1.0)
        u = UniformStream(3).uniform_replicas(np.arange(100_000), 0, Slot.PERIOD)
        ks = ks_statistic(e.quantile_array(u), e)
        assert ks.passes("1pct")

    def test_wrong_law_rejected(self):
        e1 = Exponential(1.0)
        u = UniformStream(4).uniform_replicas(np.arange(100_000), 0, Slot.PERIOD)
        ks = ks_statistic(e1.quantile_array(u), Exponential(2.0))
        # sup distance between the two exponentials is exactly 1/4
        assert abs(ks.statistic - 0.25) < 0.01
        assert not ks.passes("1pct")

    def test_empty_rejected(self):
        with pytest.raises(SpecError):
            ks_statistic([], Exponential(1.0))


class TestEmpiricalTv:
    def test_reference_samples_near_floor(self):
        u = UniformStream(5).uniform_replicas(np.arange(100_000), 0, Slot.PERIOD)
        samples = Uniform(0, 1).quantile_array(u)
        est = empirical_tv(samples, Uniform(0, 1), bins=50, seed=0)
        assert est.estimate < 0.05
        assert est.ci > 0.0

    def test_maximal_concentration_two_bins(self):
        samples = np.full(1000, 0.1)
        est = empirical_tv(samples, Uniform(0, 1), bins=2, seed=0)
        assert est.estimate == pytest.approx(1.0)

    def test_disjoint_support_saturates(self):
        samples = np.full(1000, 5.0)  # far beyond the reference support
        est = empirical_tv(samples, Uniform(0, 1), bins=50, seed=0)
        assert est.estimate > 1.9

    def test_under_resolved(self):
        with pytest.raises(SpecError, match="under-resolved"):
            empirical_tv(np.ones(100), Uniform(0, 1), bins=50)

    def test_bad_bins(self):
        with pytest.raises(SpecError):
            empirical_tv(np.ones(100), Uniform(0, 1), bins=1)

    def test_refining_bins_never_decreases(self):
        u = UniformStream(6).uniform_replicas(np.arange(20_000), 0, Slot.PERIOD)
        samples = Uniform(0, 1).quantile_array(u) ** 1.2  # slightly off-reference
        vals = [empirical_tv(samples, Uniform(0, 1), bins=b, seed=0).estimate
                for b in (5, 10, 20, 40)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_deterministic_ci(self):
        samples = np.linspace(0.01, 0.99, 2000)
        a = empirical_tv(samples, Uniform(0, 1), bins=10, seed=123)
        b = empirical_tv(samples, Uniform(0, 1), bins=10, seed=123)
        assert a.estimate == b.estimate and a.ci == b.ci


class TestTvCurve:
    def test_stationary_exponential_stays_at_noise(self, exp1, split_exp):
        curve = tv_curve(exp1, DelaySpec.stationary(), [0.5, 1.0, 5.0],
                         20_000, seed=31, split=split_exp, k_list=(1.0,),
                         exp_rate="auto", bins=20)
        assert all(e < 0.06 for e in curve.estimates)
        assert curve.exp_bound_is_diagnostic  # full overlap: literal constant is 0
        assert verify_curve(curve).passed

    def test_fixed_age_start_is_far_then_converges(self, uniform01, split_uniform):
        curve = tv_curve(uniform01, DelaySpec.fixed_age(0.0), [0.05, 10.0],
                         20_000, seed=32, split=split_uniform, k_list=(1.0,),
                         exp_rate=None, bins=20)
        # at tiny t the age law is nearly a point mass: TV close to 2
        assert curve.estimates[0] > 1.5
        assert curve.estimates[1] < 0.08

    def test_monotone_trend(self, uniform01, split_uniform):
        curve = tv_curve(uniform01, DelaySpec.fixed_age(0.0), [0.5, 5.0],
                         30_000, seed=33, split=split_uniform, k_list=(1.0,),
                         exp_rate=None, bins=20)
        assert curve.estimates[1] < curve.estimates[0]

    def test_csv_layout(self, uniform01, split_uniform):
        curve = tv_curve(uniform01, DelaySpec.fixed_age(0.0), [1.0, 2.0],
                         5_000, seed=34, split=split_uniform, k_list=(1.0, 2.0),
                         exp_rate=None, bins=10)
        header = curve.csv_header()
        assert header[:3] == ["t", "tv_estimate", "ci"]
        assert header[3].startswith("bound")
        rows = curve.csv_rows()
        assert len(rows) == 2 and len(rows[0]) == len(header)


class TestVerify:
    def _curve(self, estimates, cis, bounds):
        n = len(estimates)
        return TvCurve(t_grid=list(range(1, n + 1)), estimates=estimates,
                       cis=cis, bounds={"poly_k1": bounds},
                       bounds_raw={"poly_k1": bounds}, reports={},
                       replicas=0, bins=0, seed=0)

    def test_clamped_bound_always_passes(self):
        curve = self._curve([1.9, 2.0], [0.0, 0.0], [2.0, 5.0])
        assert verify_curve(curve).passed

    def test_violation_reported(self):
        curve = self._curve([1.0], [0.1], [0.5])
        report = verify_curve(curve)
        assert not report.passed
        assert len(report.violations()) == 1
        assert report.violations()[0]["t"] == 1

    def test_deterministic(self):
        curve = self._curve([0.5, 0.2], [0.05, 0.05], [1.0, 0.1])
        a = verify_curve(curve)
        b = verify_curve(curve)
        assert a.records == b.records and a.passed == b.passed


class TestCouplingInequality:
    def test_check_passes_for_uniform(self, uniform01, split_uniform):
        curve = tv_curve(uniform01, DelaySpec.fixed_age(0.0), [1.0, 3.0, 8.0],
                         20_000, seed=35, split=split_uniform, k_list=(1.0,),
                         exp_rate=None, bins=20)
        taus = sample_tau(uniform01, split_uniform, DelaySpec.fixed_age(0.0),
                          20_000, seed=36)
        checks = coupling_inequality_check(curve, taus)
        assert all(c["ok"] for c in checks)
        assert checks[0]["tau_tail"] > checks[-1]["tau_tail"]
