import math

import numpy as np
import pytest

from regenbound import (DelaySpec, Exponential, SpecError, Uniform, validate)
from regenbound.coupling import (probe_coupled_states, sample_ages_at,
                                 sample_tau, sample_xi_pair, sample_xi_pairs,
                                 simulate_coupling, simulate_independent_pair,
                                 state_at)
from regenbound.empirics import ks_statistic
from regenbound.streams import Slot, UniformStream


class TestPairSampler:
    def test_selector_below_overlap_coincides(self, split_uniform):
        xi, xi_t, coincided = sample_xi_pair(split_uniform, 0.0, 0.4, 0.9)
        assert coincided
        assert xi == xi_t  # bit-identical, same inverse evaluation

    def test_degenerate_always_coincides(self, split_exp, exp1):
        for u in (0.0, 0.5, 0.999):
            xi, xi_t, coincided = sample_xi_pair(split_exp, u, 0.3, 0.8)
            assert coincided
            assert xi == xi_t == exp1.quantile(0.3)

    def test_residual_branch_oracle(self, split_uniform):
        # selector 0.9 >= 0.75: residual inverse at mass 0.25 * 0.25
        xi, xi_t, coincided = sample_xi_pair(split_uniform, 0.9, 0.1, 0.25)
        assert not coincided
        assert abs(xi - 0.75) < 1e-9
        # the equilibrium residual solves s - s^2 = 0.0625
        assert abs(xi_t - (1 - math.sqrt(1 - 4 * 0.0625)) / 2) < 1e-9

    def test_vectorized_matches_scalar(self, split_gamma):
        stream = UniformStream(31)
        n = 500
        idx = np.arange(n)
        u = stream.uniform_replicas(idx, 0, Slot.PERIOD)
        u1 = stream.uniform_replicas(idx, 0, Slot.COMMON)
        u2 = stream.uniform_replicas(idx, 0, Slot.RESIDUAL)
        xi, xi_t, coin = sample_xi_pairs(split_gamma, u, u1, u2)
        for i in range(n):
            a, b, c = sample_xi_pair(split_gamma, u[i], u1[i], u2[i])
            assert xi[i] == a and xi_t[i] == b and coin[i] == c

    def test_coincidence_frequency(self, split_uniform):
        stream = UniformStream(12)
        n = 50_000
        u = stream.uniform_replicas(np.arange(n), 0, Slot.PERIOD)
        freq = float(np.mean(u < split_uniform.kappa))
        se = math.sqrt(split_uniform.kappa * 0.25 / n)
        assert abs(freq - split_uniform.kappa) < 4 * se


class TestIndependentPair:
    def test_stationary_copy_age_is_stationary(self, exp1):
        stream = UniformStream(404)
        ages = []
        for r in range(20_000):
            _, trace2 = simulate_independent_pair(exp1, DelaySpec.law(exp1),
                                                  10.0, stream, replica=r)
            ages.append(trace2.age_at(10.0))
        ks = ks_statistic(np.array(ages), exp1)  # equilibrium of exp is itself
        assert ks.passes("1pct"), ks.statistic

    def test_initial_age_matches_equilibrium(self, uniform01):
        stream = UniformStream(405)
        ages = [simulate_independent_pair(uniform01, DelaySpec.law(uniform01),
                                          0.001, stream, replica=r)[1].initial_age
                for r in range(20_000)]
        ks = ks_statistic(np.array(ages), uniform01.equilibrium())
        assert ks.passes("1pct"), ks.statistic

    def test_tiny_horizon_boundary(self, uniform01):
        stream = UniformStream(406)
        t1, t2 = simulate_independent_pair(uniform01, DelaySpec.law(uniform01),
                                           1e-12, stream)
        assert len(t1.epochs) >= 1 and len(t2.epochs) >= 1
        assert all(e > 1e-12 for e in t1.epochs[-1:])


class TestSimulateCoupling:
    def test_exponential_merges_at_second_renewal(self, exp1, split_exp):
        stream = UniformStream(808)
        for r in range(50):
            trace = simulate_coupling(exp1, split_exp, DelaySpec.law(exp1),
                                      stream, replica=r)
            assert trace.coupling_attempt == 1
            eps = trace.epochs_original
            assert trace.tau == eps[1]  # delay epoch, then the merge epoch
            assert trace.tau > trace.delay_draw

    def test_event_times_increase(self, uniform01, split_uniform):
        stream = UniformStream(809)
        trace = simulate_coupling(uniform01, split_uniform,
                                  DelaySpec.law(uniform01), stream, horizon=6.0)
        times = [e.time for e in trace.events]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_epochs_shared_after_merge(self, uniform01, split_uniform):
        stream = UniformStream(810)
        for r in range(30):
            trace = simulate_coupling(uniform01, split_uniform,
                                      DelaySpec.law(uniform01), stream,
                                      replica=r, horizon=8.0)
            after = trace.tau - 1e-12
            orig = [t for t in trace.epochs_original if t >= after]
            stat = [t for t in trace.epochs_stationary if t >= after]
            assert orig == stat

    def test_absorption(self, uniform01, split_uniform):
        stream = UniformStream(811)
        trace = simulate_coupling(uniform01, split_uniform,
                                  DelaySpec.law(uniform01), stream, horizon=8.0)
        rng = np.random.default_rng(0)
        for t in trace.tau + rng.uniform(0, 8.0 - trace.tau, size=50):
            z, zt = state_at(trace, float(t))
            assert z == zt

    def test_state_at_merge_epoch(self, uniform01, split_uniform):
        stream = UniformStream(812)
        trace = simulate_coupling(uniform01, split_uniform,
                                  DelaySpec.law(uniform01), stream, horizon=5.0)
        z, zt = trace.state_at(trace.tau)
        assert z == zt == 0.0
        dz, dzt = trace.state_at(min(trace.tau + 0.05, trace.horizon))
        assert dz == dzt == pytest.approx(min(0.05, trace.horizon - trace.tau))

    def test_initial_state_fixed_age(self, uniform01, split_uniform):
        stream = UniformStream(813)
        trace = simulate_coupling(uniform01, split_uniform,
                                  DelaySpec.fixed_age(0.3), stream, horizon=4.0)
        z0, zt0 = trace.state_at(0.0)
        assert z0 == 0.3
        assert zt0 == trace.zt_age0

    def test_state_beyond_horizon_rejected(self, uniform01, split_uniform):
        stream = UniformStream(814)
        trace = simulate_coupling(uniform01, split_uniform,
                                  DelaySpec.law(uniform01), stream, horizon=2.0)
        with pytest.raises(SpecError):
            trace.state_at(trace.horizon + 1.0)

    def test_bitwise_determinism(self, uniform01, split_uniform):
        def run():
            stream = UniformStream(4242)
            return simulate_coupling(uniform01, split_uniform,
                                     DelaySpec.law(uniform01), stream,
                                     replica=7, horizon=5.0)
        a, b = run(), run()
        assert a.tau == b.tau
        assert [e.time for e in a.events] == [e.time for e in b.events]
        assert [e.case for e in a.events] == [e.case for e in b.events]


class TestSampleTau:
    def test_single_replica_repeatable(self, uniform01, split_uniform):
        one = sample_tau(uniform01, split_uniform, DelaySpec.law(uniform01), 1, 99)
        two = sample_tau(uniform01, split_uniform, DelaySpec.law(uniform01), 1, 99)
        assert one.taus[0] == two.taus[0]

    def test_uniform_mean_below_series_bound(self, uniform01, split_uniform):
        ts = sample_tau(uniform01, split_uniform, DelaySpec.fixed_age(0.0),
                        20_000, seed=515)
        assert ts.n_censored == 0
        assert ts.mean <= 11.0 / 6.0 + 3.0 * ts.se

    def test_exponential_mean_is_two_cycles(self, exp1, split_exp):
        ts = sample_tau(exp1, split_exp, DelaySpec.law(exp1), 20_000, seed=516)
        assert abs(ts.mean - 2.0) <= 3.0 * ts.se

    def test_censoring_reported(self, uniform01, split_uniform):
        ts = sample_tau(uniform01, split_uniform, DelaySpec.law(uniform01),
                        200, seed=517, max_epochs=2)
        assert ts.n_censored > 0
        assert np.isnan(ts.taus).sum() == ts.n_censored
        assert 0.0 < ts.tail_prob(1e9) <= 1.0

    def test_geometric_attempts_quick(self, uniform01, split_uniform):
        ts = sample_tau(uniform01, split_uniform, DelaySpec.law(uniform01),
                        20_000, seed=518)
        att = ts.attempts
        for n in (1, 2, 3):
            expected = 0.75 * 0.25 ** (n - 1)
            se = math.sqrt(expected * (1 - expected) / len(att))
            assert abs(np.mean(att == n) - expected) < 4 * se

    def test_replica_count_validated(self, uniform01, split_uniform):
        with pytest.raises(SpecError):
            sample_tau(uniform01, split_uniform, DelaySpec.law(uniform01), 0, 1)


class TestProbeStates:
    def test_merge_forces_equality(self, uniform01, split_uniform):
        z, zt, taus = probe_coupled_states(uniform01, split_uniform,
                                           DelaySpec.law(uniform01),
                                           [4.0], 5_000, seed=616)
        merged = taus <= 4.0
        assert merged.mean() > 0.95
        assert np.all(z[0][merged] == zt[0][merged])

    def test_matches_full_trace(self, uniform01, split_uniform):
        times = [0.0, 0.7, 2.3]
        z, zt, taus = probe_coupled_states(uniform01, split_uniform,
                                           DelaySpec.law(uniform01),
                                           times, 20, seed=617)
        stream = UniformStream(617)
        for r in range(20):
            trace = simulate_coupling(uniform01, split_uniform,
                                      DelaySpec.law(uniform01), stream,
                                      replica=r, horizon=3.0)
            for i, t in enumerate(times):
                a, b = trace.state_at(t)
                assert z[i, r] == pytest.approx(a, abs=1e-12)
                assert zt[i, r] == pytest.approx(b, abs=1e-12)


class TestAgeSampler:
    def test_fixed_age_at_time_zero(self, uniform01):
        ages = sample_ages_at(uniform01, DelaySpec.fixed_age(0.4), [0.0], 500, 7)
        assert np.all(ages[0] == 0.4)

    def test_stationary_exponential_everywhere(self, exp1):
        ages = sample_ages_at(exp1, DelaySpec.stationary(), [0.3, 2.0, 7.0],
                              50_000, seed=718)
        for row in ages:
            ks = ks_statistic(row, exp1)
            assert ks.passes("1pct"), ks.statistic

    def test_unsorted_grid_rejected(self, uniform01):
        with pytest.raises(SpecError):
            sample_ages_at(uniform01, DelaySpec.fixed_age(0.0), [2.0, 1.0], 10, 1)
