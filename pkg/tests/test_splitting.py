import math

import numpy as np
import pytest

from regenbound import (Exponential, Gamma, SpecError, TabulatedCdf, Uniform,
                        validate)
from regenbound.empirics import ks_statistic
from regenbound.splitting import (SplitDecomposition, SplitError,
                                  compute_split, phi_at)
from regenbound.streams import Slot, UniformStream

# analytic values for uniform(0, 1): densities cross at 1/2, overlap 3/4
KAPPA_UNIFORM = 0.75
# for gamma(2, 1): densities cross at 1, overlap 1 - 1/(2e)
KAPPA_GAMMA = 0.8160602794142788
# integral of exp(s) against the residual part of uniform(0,1): 2 sqrt(e) - e
LAPLACE_UNIFORM_AT_1 = 0.5791607129412111


class TestPhiAt:
    def test_exponential_equal_densities(self, exp1):
        assert abs(phi_at(exp1, 2.0) - math.exp(-2.0)) < 1e-12

    def test_uniform_below_crossing(self, uniform01):
        assert abs(phi_at(uniform01, 0.25) - 1.0) < 1e-12

    def test_uniform_above_crossing(self, uniform01):
        assert abs(phi_at(uniform01, 0.75) - 0.5) < 1e-12


class TestComputeSplit:
    def test_uniform_overlap(self, split_uniform):
        assert abs(split_uniform.kappa - KAPPA_UNIFORM) < 1e-10
        assert split_uniform.kappa_err < 1e-9

    def test_uniform_residual_values(self, split_uniform):
        assert abs(split_uniform.psi(0.75) - 0.0625) < 1e-10
        for s in (0.55, 0.7, 0.9):
            assert abs(split_uniform.psi(s) - (s - 0.5) ** 2) < 1e-10

    def test_exponential_degenerate(self, split_exp):
        assert split_exp.kappa == 1.0
        assert split_exp.degenerate
        for s in (0.5, 1.0, 3.0):
            assert split_exp.psi(s) == 0.0
            assert split_exp.psi_tilde(s) == 0.0

    def test_gamma_overlap(self, split_gamma):
        assert abs(split_gamma.kappa - KAPPA_GAMMA) < 1e-10

    def test_gamma_values(self, split_gamma):
        assert abs(split_gamma.psi(2.0) - 0.04860443734910847) < 1e-9
        assert abs(split_gamma.phi(2.0) - 0.5453897129410535) < 1e-9

    def test_degenerate_overlap_rejected(self):
        # essentially all mass in a sliver near 1: overlap with the
        # equilibrium law is far below working precision
        d = validate(TabulatedCdf([[1.0, 0.0], [1.0 + 1e-12, 1.0]]))
        with pytest.raises(SplitError, match="degenerate"):
            compute_split(d)

    def test_bad_tolerance(self, uniform01):
        with pytest.raises(SpecError):
            compute_split(uniform01, tol=0.0)


class TestInverses:
    def test_uniform_phi(self, split_uniform):
        assert abs(split_uniform.inverse_phi(0.5) - 0.5) < 1e-10

    def test_uniform_psi(self, split_uniform):
        assert abs(split_uniform.inverse_psi(0.0625) - 0.75) < 1e-10

    def test_uniform_psi_tilde(self, split_uniform):
        # PsiTilde(s) = s - s^2 below the crossing
        assert abs(split_uniform.inverse_psi_tilde(0.09) - 0.1) < 1e-10

    def test_gamma_phi(self, split_gamma):
        assert abs(split_gamma.inverse_phi(0.5) - 1.7914142471632301) < 1e-9

    def test_degenerate_convention(self, split_exp):
        assert split_exp.inverse_psi(0.0) == 0.0
        assert split_exp.inverse_psi_tilde(0.0) == 0.0
        assert abs(split_exp.inverse_phi(1 - math.exp(-1)) - 1.0) < 1e-12

    def test_range_errors(self, split_uniform):
        with pytest.raises(SpecError):
            split_uniform.inverse_phi(0.75)
        with pytest.raises(SpecError):
            split_uniform.inverse_psi(0.25)
        with pytest.raises(SpecError):
            split_uniform.inverse_psi_tilde(-0.01)

    def test_round_trip(self, split_gamma):
        for y in (0.01, 0.3, 0.6, 0.81):
            s = split_gamma.inverse_phi(y)
            assert abs(split_gamma.phi(s) - y) < 1e-9
        for y in (0.001, 0.05, 0.15):
            s = split_gamma.inverse_psi(y)
            assert abs(split_gamma.psi(s) - y) < 1e-9

    def test_vectorized_matches_scalar(self, split_gamma):
        ys = np.array([0.01, 0.2, 0.5, 0.8])
        scalar = np.array([split_gamma.inverse_phi(float(y)) for y in ys])
        assert np.allclose(split_gamma.inverse_phi_array(ys), scalar, atol=1e-10)
        ym = np.array([0.002, 0.05, 0.12])
        scalar = np.array([split_gamma.inverse_psi(float(y)) for y in ym])
        assert np.allclose(split_gamma.inverse_psi_array(ym), scalar, atol=1e-10)
        scalar = np.array([split_gamma.inverse_psi_tilde(float(y)) for y in ym])
        assert np.allclose(split_gamma.inverse_psi_tilde_array(ym), scalar, atol=1e-10)

    def test_equilibrium_quantile_shortcut(self, split_gamma, gamma21):
        eq = gamma21.equilibrium()
        for y in (0.05, 0.4, 0.95):
            assert abs(split_gamma.equilibrium_quantile(y) - eq.quantile(y)) < 1e-9


class TestAdditivityInvariants:
    @pytest.mark.parametrize("fixture", ["split_uniform", "split_gamma"])
    def test_pointwise_additivity(self, fixture, request):
        sp = request.getfixturevalue(fixture)
        tol = 10 * sp.grid_tol + 1e-9
        grid = np.linspace(0, float(sp.nodes[-1]), 301)
        for s in grid:
            f = sp.dist.cdf(float(s))
            feq = sp.eq.cdf(float(s))
            assert abs(sp.phi(float(s)) + sp.psi(float(s)) - f) < tol
            assert abs(sp.phi(float(s)) + sp.psi_tilde(float(s)) - feq) < tol

    @pytest.mark.parametrize("fixture", ["split_uniform", "split_gamma"])
    def test_mass_split(self, fixture, request):
        sp = request.getfixturevalue(fixture)
        tol = 10 * sp.grid_tol + 1e-9
        top = float(sp.nodes[-1])
        assert abs(sp.phi(top) + sp.psi(top) - 1.0) < tol + 1e-10
        assert abs(sp.psi(top) - sp.psi_tilde(top)) < tol + 1e-10
        assert abs(sp.phi_nodes[-1] - sp.kappa) < 1e-15


class TestMixtureIdentity:
    # sampling from the two-component mixture must reproduce the law itself
    @pytest.mark.parametrize("fixture,tilde", [("split_uniform", False),
                                               ("split_uniform", True),
                                               ("split_gamma", False),
                                               ("split_gamma", True)])
    def test_mixture(self, fixture, tilde, request):
        sp = request.getfixturevalue(fixture)
        stream = UniformStream(8800 + tilde)
        n = 100_000
        idx = np.arange(n)
        sel = stream.uniform_replicas(idx, 0, Slot.PERIOD)
        u1 = stream.uniform_replicas(idx, 0, Slot.COMMON)
        u2 = stream.uniform_replicas(idx, 0, Slot.RESIDUAL)
        common = sel < sp.kappa
        out = np.empty(n)
        out[common] = sp.inverse_phi_array(sp.kappa * u1[common])
        if tilde:
            out[~common] = sp.inverse_psi_tilde_array((1 - sp.kappa) * u2[~common])
            ks = ks_statistic(out, sp.eq)
        else:
            out[~common] = sp.inverse_psi_array((1 - sp.kappa) * u2[~common])
            ks = ks_statistic(out, sp.dist)
        assert ks.passes("1pct"), ks.statistic


class TestLaplace:
    def test_at_zero_exact(self, split_uniform, split_gamma):
        assert split_uniform.laplace_psi(0.0) == 1.0 - split_uniform.kappa
        assert split_gamma.laplace_psi(0.0) == 1.0 - split_gamma.kappa

    def test_uniform_oracle(self, split_uniform):
        assert abs(split_uniform.laplace_psi(1.0) - LAPLACE_UNIFORM_AT_1) < 1e-8

    def test_gamma_oracle(self, split_gamma):
        # residual density (s-1) e^{-s} / 2 on [1, inf): weighted mass 2 e^{-1/2}
        assert abs(split_gamma.laplace_psi(0.5) - 2.0 * math.exp(-0.5)) < 1e-7

    def test_exponential_zero(self, split_exp):
        assert split_exp.laplace_psi(3.0) == 0.0

    def test_monotone_and_floored(self, split_uniform):
        vals = [split_uniform.laplace_psi(a) for a in (0.0, 0.3, 0.8, 1.2, 2.0)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert all(v >= 1.0 - split_uniform.kappa - 1e-12 for v in vals)

    def test_divergence_flag(self):
        g = validate(Gamma(2, 1))
        sp = compute_split(g)
        assert sp.laplace_psi(1.5) == math.inf


class TestScaleEquivariance:
    def test_uniform_scaling(self):
        base = compute_split(validate(Uniform(0, 1)))
        scaled = compute_split(validate(Uniform(0, 3.0)))
        assert abs(base.kappa - scaled.kappa) < 1e-9
        for y in (0.1, 0.4, 0.7):
            assert abs(scaled.inverse_phi(y) - 3.0 * base.inverse_phi(y)) < 1e-8
        for y in (0.01, 0.2):
            assert abs(scaled.inverse_psi(y) - 3.0 * base.inverse_psi(y)) < 1e-8

    def test_gamma_scaling(self):
        base = compute_split(validate(Gamma(2, 1)))
        scaled = compute_split(validate(Gamma(2, 0.5)))  # time stretched by 2
        assert abs(base.kappa - scaled.kappa) < 1e-9
        for y in (0.1, 0.5):
            assert abs(scaled.inverse_phi(y) - 2.0 * base.inverse_phi(y)) < 1e-7


def test_serialization_round_trip(split_uniform):
    text = split_uniform.to_json()
    back = SplitDecomposition.from_json(text)
    assert back.kappa == split_uniform.kappa
    assert np.array_equal(back.nodes, split_uniform.nodes)
    for y in (0.1, 0.5, 0.7):
        assert back.inverse_phi(y) == split_uniform.inverse_phi(y)
    assert abs(back.laplace_psi(1.0) - split_uniform.laplace_psi(1.0)) < 1e-12
