"""Convergence-rate bounds for regenerative processes via coupling.

The package computes explicit polynomial and exponential total-variation
convergence-rate constants for the age process of a renewal stream, and
validates them by simulating a successful coupling between the delayed
process and its stationary version.
"""

from .bounds import (BoundReport, exp_constant, find_rate, make_exp_report,
                     make_poly_report, poly_constant, tv_bound)
from .coupling import (CouplingTrace, RenewalTrace, TauSamples,
                       probe_coupled_states, sample_ages_at, sample_tau,
                       sample_xi_pair, sample_xi_pairs,
                       simulate_coupling, simulate_independent_pair, state_at)
from .distributions import (DelaySpec, Distribution, Equilibrium, Exponential,
                            Gamma, HyperExponential, MomentSummary, Overshoot,
                            SpecError, TabulatedCdf, Uniform, Weibull,
                            equilibrium, evaluate, from_spec, moment_summary,
                            overshoot, parse_dist, validate)
from .empirics import (KsResult, TvCurve, TvEstimate, coupling_inequality_check,
                       empirical_tv, ks_statistic, tv_curve, verify_curve)
from .splitting import SplitDecomposition, SplitError, compute_split, phi_at
from .streams import Slot, UniformStream

__version__ = "0.1.0"
