"""Coupling and rate constants for alternating (busy/idle) renewal processes.

A two-state process alternates independent sojourns: state-1 periods from
F1 (which must satisfy the standing density condition) and state-2 periods
from F2, known either as a full law or only through moment bounds (mean
bound m2, optionally higher moments).  The completed state is the pair
(state, elapsed age), which is Markov.

Coupling attempts happen at the original process's 2 -> 1 transitions.
Each attempt first passes an occupancy gate with probability
p = mu1 / (mu1 + mu2) -- in stationarity that is the chance the stationary
copy sits in state 1.  On a passed gate the busy periods come from the
coupled pair sampler (coinciding with probability kappa, the overlap mass
of F1); on a failed gate the stationary copy is re-anchored in state 2
with a fresh equilibrium idle residual.  A cycle therefore succeeds with
probability exactly p * kappa, and the number of cycles to success is
geometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import exp_constant, poly_constant
from .distributions import Distribution, SpecError, validate
from .splitting import SplitDecomposition
from .streams import Slot, UniformStream

__all__ = [
    "AlternatingSpec",
    "Occupancy",
    "AltBoundReport",
    "AltSamples",
    "occupancy",
    "alt_constants",
    "sample_alt_coupling",
    "probe_alt_states",
    "simulate_occupancy",
    "alt_tau_bound_check",
]

_ALT_MAX_EVENTS = 10 ** 6


@dataclass
class AlternatingSpec:
    """Busy/idle period laws plus the initial completed state (state, age)."""

    f1: Distribution
    f2: Distribution | None = None
    m2: float | None = None
    f2_moment_bounds: dict = field(default_factory=dict)  # order -> upper bound
    initial_state: tuple[int, float] = (2, 0.0)

    def __post_init__(self):
        validate(self.f1)
        if (self.f2 is None) == (self.m2 is None):
            raise SpecError("exactly one of f2 (full law) or m2 (mean bound) is required")
        if self.m2 is not None and not (math.isfinite(self.m2) and self.m2 >= 0):
            raise SpecError(f"m2 must be a finite nonnegative bound, got {self.m2!r}")
        state, age = self.initial_state
        if state not in (1, 2):
            raise SpecError(f"initial state label must be 1 or 2, got {state!r}")
        if age < 0:
            raise SpecError("initial age must be nonnegative")

    @property
    def bounds_only(self) -> bool:
        return self.f2 is None

    def mu2_or_bound(self) -> float:
        return self.f2.mean if self.f2 is not None else float(self.m2)

    def f2_moment(self, k: float) -> float:
        """E (idle period)^k, or its declared upper bound."""
        if self.f2 is not None:
            return self.f2.raw_moment(k) if k >= 1 else 1.0
        if k == 1:
            return float(self.m2)
        bound = self.f2_moment_bounds.get(k) or self.f2_moment_bounds.get(int(k))
        if bound is None:
            raise SpecError(f"bounds-only idle law lacks a moment bound of order {k}")
        return float(bound)


@dataclass
class Occupancy:
    p: float | None      # exact stationary state-1 probability (full law)
    rho: float           # lower bound from the mean bound (equals p when exact)

    def effective(self, kappa: float) -> float:
        """Per-cycle success probability of the coupling attempt."""
        return (self.p if self.p is not None else self.rho) * kappa


def occupancy(spec: AlternatingSpec) -> Occupancy:
    mu1 = spec.f1.mean
    if spec.bounds_only:
        return Occupancy(p=None, rho=mu1 / (mu1 + spec.m2))
    mu2 = spec.f2.mean
    p = mu1 / (mu1 + mu2)
    return Occupancy(p=p, rho=p)


def _sum_moment(k: float, mom_a, mom_b) -> tuple[float, str]:
    """E (X+Y)^k for independent X, Y given their raw-moment callables.

    Integer k uses the exact binomial expansion (with moment order 0 = 1);
    non-integer k falls back to the Minkowski upper bound, which is the
    safe direction for rate constants.
    """
    if float(k).is_integer():
        k = int(k)
        total = 0.0
        for j in range(k + 1):
            total += math.comb(k, j) * mom_a(j) * mom_b(k - j)
        return total, "binomial"
    xa = mom_a(k) ** (1.0 / k)
    xb = mom_b(k) ** (1.0 / k)
    return (xa + xb) ** k, "minkowski"


def _moment_fn(d: Distribution):
    return lambda j: 1.0 if j == 0 else d.raw_moment(j)


def _bound_moment_fn(spec: AlternatingSpec):
    return lambda j: 1.0 if j == 0 else spec.f2_moment(j)


def _first_attempt_moments(spec: AlternatingSpec, k: float) -> tuple[float, str]:
    """Moments of the time until the first 2 -> 1 transition.

    Starting in state 2 with age a the wait is the state-2 residual;
    starting in state 1 it is the state-1 residual plus one idle period.
    """
    state, age = spec.initial_state
    if state == 2:
        if spec.bounds_only:
            if age != 0.0:
                raise SpecError("bounds-only idle law cannot start mid-idle "
                                "(residual moments are not determined by m2)")
            return spec.f2_moment(k), "bounds" if spec.bounds_only else "exact"
        return spec.f2.overshoot(age).raw_moment(k), "exact"
    residual = spec.f1.overshoot(age)
    value, method = _sum_moment(k, _moment_fn(residual),
                                _bound_moment_fn(spec) if spec.bounds_only
                                else _moment_fn(spec.f2))
    return value, method


@dataclass
class AltBoundReport:
    mode: str
    constant: float
    k: float | None
    a: float | None
    p: float | None
    rho: float
    kappa: float
    effective_probability: float
    inputs: dict
    diagnostics: dict

    def tv_bound(self, t: float) -> tuple[float, float]:
        if self.mode == "polynomial":
            raw = math.inf if t <= 0 else 2.0 * self.constant / t ** self.k
        else:
            raw = 2.0 * self.constant * math.exp(-self.a * t)
        return raw, min(raw, 2.0)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode, "constant": self.constant,
            "k": self.k, "a": self.a,
            "p": self.p, "rho": self.rho, "kappa": self.kappa,
            "effective_probability": self.effective_probability,
            "inputs": self.inputs, "diagnostics": self.diagnostics,
        }


def alt_constants(spec: AlternatingSpec, split1: SplitDecomposition, *,
                  mode: str = "polynomial", k: float = 1.0,
                  a: float | None = None) -> AltBoundReport:
    """Rate constant for the alternating coupling.

    Polynomial mode reuses the renewal-skeleton series with the overlap
    mass replaced by the per-cycle success probability and the period
    moments by moments of one busy plus one idle period.  Exponential mode
    uses the per-cycle weighted failure functional
    M2(a) ((1-p) M1(a) + p P_a), which reduces to the plain functional at
    p = 1 and to 1 - p kappa at a = 0.
    """
    occ = occupancy(spec)
    kappa = split1.kappa
    eff = occ.effective(kappa)
    if eff <= 0.0:
        raise SpecError("effective coupling probability is zero")
    mu1 = spec.f1.mean

    if mode == "polynomial":
        m0k, delay_method = _first_attempt_moments(spec, k)
        m1k, cycle_method = _sum_moment(k, _moment_fn(spec.f1),
                                        _bound_moment_fn(spec) if spec.bounds_only
                                        else _moment_fn(spec.f2))
        constant, diag = poly_constant(eff, m0k, m1k, k)
        diag.update({"delay_moment_method": delay_method,
                     "cycle_moment_method": cycle_method})
        return AltBoundReport(
            mode="polynomial", constant=constant, k=k, a=None,
            p=occ.p, rho=occ.rho, kappa=kappa, effective_probability=eff,
            inputs={"m0k": m0k, "m1k": m1k, "mu1": mu1,
                    "mu2_or_bound": spec.mu2_or_bound()},
            diagnostics=diag,
        )

    if mode != "exponential":
        raise SpecError(f"unknown mode {mode!r}")
    if spec.bounds_only:
        raise SpecError("exponential mode needs the full idle law (mgf required)")
    if a is None or a <= 0:
        raise SpecError("exponential mode requires an explicit positive rate")
    p = occ.p
    m1a = spec.f1.mgf(a)
    m2a = spec.f2.mgf(a)
    p_res = split1.laplace_psi(a)
    if not (math.isfinite(m1a) and math.isfinite(m2a) and math.isfinite(p_res)):
        raise SpecError("mgf diverges at this rate")
    cycle_factor = m2a * ((1.0 - p) * m1a + p * p_res)
    state, age = spec.initial_state
    if state == 2:
        mgf_first = spec.f2.overshoot(age).mgf(a)
    else:
        mgf_first = spec.f1.overshoot(age).mgf(a) * m2a
    if not math.isfinite(mgf_first):
        raise SpecError("first-attempt mgf diverges at this rate")
    constant = exp_constant(cycle_factor, mgf_first)
    return AltBoundReport(
        mode="exponential", constant=constant, k=None, a=a,
        p=occ.p, rho=occ.rho, kappa=kappa, effective_probability=eff,
        inputs={"cycle_factor": cycle_factor, "mgf_first": mgf_first,
                "m1a": m1a, "m2a": m2a, "p_a": p_res},
        diagnostics={},
    )


# -- simulation ---------------------------------------------------------------

@dataclass
class AltSamples:
    """Per-replica coupling outcomes of the alternating construction."""

    taus: np.ndarray       # nan where censored
    nus: np.ndarray        # cycles until success (0 where censored)
    n_censored: int
    seed: int

    def nu_tail(self, n: int) -> float:
        good = self.nus > 0
        return float(np.mean(self.nus[good] > n)) if good.any() else math.nan


class _AltState:
    __slots__ = ("state", "t_next")

    def __init__(self, state: int, t_next: float):
        self.state = state
        self.t_next = t_next


def _alt_replica(spec: AlternatingSpec, split1: SplitDecomposition,
                 stream: UniformStream, replica: int, p: float,
                 probes: Sequence[float] | None, max_events: int):
    """One coupled alternating replica.

    Returns (tau, nu, probe_states) where probe_states is a list of
    ((state, age), (state~, age~)) tuples at the requested times.
    """
    f1, f2 = spec.f1, spec.f2
    eq1 = f1.equilibrium()
    eq2 = f2.equilibrium() if f2.mean > 0 else None
    state0, age0 = spec.initial_state

    start_law = (f1 if state0 == 1 else f2).overshoot(age0)
    orig = _AltState(state0, start_law.quantile(stream.uniform(replica, 0, Slot.PERIOD)))

    if stream.uniform(replica, 0, Slot.GATE) < p or eq2 is None:
        s_state, s_law = 1, f1
        resid = split1.equilibrium_quantile(stream.uniform(replica, 0, Slot.COMMON))
    else:
        s_state, s_law = 2, f2
        resid = eq2.quantile(stream.uniform(replica, 0, Slot.COMMON))
    stat = _AltState(s_state, resid)
    stat_age0 = _ov_quantile(s_law, resid, stream.uniform(replica, 0, Slot.AGE))

    seg_start = 0.0
    orig_age0 = age0
    merged = False
    pending = False
    attempt = 0
    tau = math.nan
    nu = 0
    probes = list(probes) if probes is not None else []
    probe_out = []
    pi = 0

    def flush_probes(upto: float):
        nonlocal pi
        while pi < len(probes) and probes[pi] < upto:
            dt = probes[pi] - seg_start
            probe_out.append(((orig.state, orig_age0 + dt),
                              (stat.state, stat_age0 + dt)))
            pi += 1

    horizon = probes[-1] if probes else 0.0
    for n in range(1, max_events + 1):
        if merged or pending:
            T = orig.t_next
            flush_probes(T)
            if pending:
                merged, pending = True, False
                tau = T
                nu = attempt
            new_state = 3 - orig.state
            law = f1 if new_state == 1 else f2
            draw = law.quantile(stream.uniform(replica, n, Slot.PERIOD))
            orig.state = stat.state = new_state
            orig.t_next = stat.t_next = T + draw
            seg_start, orig_age0, stat_age0 = T, 0.0, 0.0
        elif stat.t_next < orig.t_next:
            T = stat.t_next
            flush_probes(T)
            stat.state = 3 - stat.state
            law = f1 if stat.state == 1 else f2
            stat.t_next = T + law.quantile(stream.uniform(replica, n, Slot.COMMON))
            orig_age0 = orig_age0 + (T - seg_start)
            stat_age0 = 0.0
            seg_start = T
        else:
            T = orig.t_next
            flush_probes(T)
            new_state = 3 - orig.state
            orig.state = new_state
            orig_age0 = 0.0
            stat_age0 = stat_age0 + (T - seg_start)
            if new_state == 1:
                attempt += 1
                gate = stream.uniform(replica, n, Slot.GATE) < p
                u = stream.uniform(replica, n, Slot.PERIOD)
                coincided = u < split1.kappa
                if coincided:
                    xi = xi_t = split1.inverse_phi(
                        split1.kappa * stream.uniform(replica, n, Slot.COMMON))
                else:
                    mass = (1.0 - split1.kappa) * stream.uniform(replica, n, Slot.RESIDUAL)
                    xi = split1.inverse_psi(mass)
                    xi_t = split1.inverse_psi_tilde(mass)
                orig.t_next = T + xi
                if gate:
                    stat.state = 1
                    stat.t_next = T + xi_t
                    stat_age0 = _ov_quantile(f1, xi_t, stream.uniform(replica, n, Slot.AGE))
                    pending = coincided
                elif eq2 is not None:
                    stat.state = 2
                    resid = eq2.quantile(stream.uniform(replica, n, Slot.EXTRA))
                    stat.t_next = T + resid
                    stat_age0 = _ov_quantile(f2, resid, stream.uniform(replica, n, Slot.AGE))
            else:
                orig.t_next = T + f2.quantile(stream.uniform(replica, n, Slot.PERIOD))
            seg_start = T
        if (merged and not probes) or (merged and pi >= len(probes) and T > horizon):
            break
    flush_probes(math.inf if not math.isnan(tau) else horizon + 0.0)
    while pi < len(probes):  # censored replica: extend the last segment
        dt = probes[pi] - seg_start
        probe_out.append(((orig.state, orig_age0 + dt), (stat.state, stat_age0 + dt)))
        pi += 1
    return tau, nu, probe_out


def _ov_quantile(d: Distribution, age: float, y: float) -> float:
    fa = d.cdf(age)
    surv = 1.0 - fa
    if surv <= 0.0:
        return 0.0
    return max(d.quantile(min(fa + y * surv, 1.0 - 1e-16)) - age, 0.0)


def sample_alt_coupling(spec: AlternatingSpec, split1: SplitDecomposition,
                        n_replicas: int, seed: int,
                        max_events: int = _ALT_MAX_EVENTS) -> AltSamples:
    """Coupling times and cycle counts across independent replicas."""
    if spec.bounds_only:
        raise SpecError("bounds-only idle law cannot be simulated")
    p = occupancy(spec).p
    stream = UniformStream(seed)
    taus = np.full(n_replicas, np.nan)
    nus = np.zeros(n_replicas, dtype=np.int64)
    censored = 0
    for r in range(n_replicas):
        tau, nu, _ = _alt_replica(spec, split1, stream, r, p, None, max_events)
        taus[r] = tau
        nus[r] = nu
        if math.isnan(tau):
            censored += 1
    return AltSamples(taus=taus, nus=nus, n_censored=censored, seed=seed)


def probe_alt_states(spec: AlternatingSpec, split1: SplitDecomposition,
                     times: Sequence[float], n_replicas: int, seed: int,
                     max_events: int = _ALT_MAX_EVENTS):
    """States and ages of both coupled processes at the probe times.

    Returns (orig, stat, taus): orig and stat are arrays of shape
    (len(times), n_replicas, 2) holding (state, age).
    """
    if spec.bounds_only:
        raise SpecError("bounds-only idle law cannot be simulated")
    times = sorted(float(t) for t in times)
    p = occupancy(spec).p
    stream = UniformStream(seed)
    orig = np.empty((len(times), n_replicas, 2))
    stat = np.empty((len(times), n_replicas, 2))
    taus = np.full(n_replicas, np.nan)
    for r in range(n_replicas):
        tau, _, probe_out = _alt_replica(spec, split1, stream, r, p, times, max_events)
        taus[r] = tau
        for i, ((s, x), (st, xt)) in enumerate(probe_out):
            orig[i, r] = (s, x)
            stat[i, r] = (st, xt)
    return orig, stat, taus


def simulate_occupancy(spec: AlternatingSpec, n_cycles: int, seed: int) -> dict:
    """Long-run state-1 time fraction of the uncoupled process.

    Uses full busy/idle cycles and the ratio estimator for the standard
    error, so the 3-SE comparison against the stationary occupancy is
    well calibrated.
    """
    if spec.bounds_only:
        raise SpecError("bounds-only idle law cannot be simulated")
    stream = UniformStream(seed)
    steps = np.arange(n_cycles, dtype=np.int64)
    busy = spec.f1.quantile_array(stream.uniform_steps(0, steps, Slot.PERIOD))
    idle = spec.f2.quantile_array(stream.uniform_steps(0, steps, Slot.COMMON))
    cycles = busy + idle
    p_hat = float(np.sum(busy) / np.sum(cycles))
    resid = busy - p_hat * cycles
    se = float(np.sqrt(np.sum(resid ** 2) / (n_cycles - 1) / n_cycles)
               / np.mean(cycles))
    return {"p_hat": p_hat, "se": se, "n_cycles": n_cycles, "seed": seed}


def alt_tau_bound_check(spec: AlternatingSpec, split1: SplitDecomposition,
                        samples: AltSamples) -> dict:
    """Check the mean coupling time against the cycle-decomposition bound.

    bound = E[first attempt time] + mu1 / kappa
          + (1 / (p kappa) - 1) (mu1 + mu2),
    with rho and the mean bound replacing p and mu2 in bounds-only mode.
    The middle term dominates the mean of the final (coinciding) busy
    period; the last term covers the failed cycles of the geometric count.
    """
    occ = occupancy(spec)
    kappa = split1.kappa
    eff = occ.effective(kappa)
    mu1 = spec.f1.mean
    mu2 = spec.mu2_or_bound()
    first, _ = _first_attempt_moments(spec, 1.0)
    bound = first + mu1 / kappa + (1.0 / eff - 1.0) * (mu1 + mu2)
    ok_taus = samples.taus[~np.isnan(samples.taus)]
    mean = float(np.mean(ok_taus))
    se = float(np.std(ok_taus, ddof=1) / math.sqrt(len(ok_taus)))
    return {
        "empirical_mean": mean,
        "se": se,
        "bound": bound,
        "n": int(len(ok_taus)),
        "n_censored": samples.n_censored,
        "ok": bool(mean <= bound + 3.0 * se),
    }
