"""Successful coupling of a delayed age process with its stationary version.

Two backward-renewal (age) processes are built on one variate stream: the
original one, delayed by the first-cycle law, and a stationary copy.  Only
renewal epochs need constructing; between epochs ages grow linearly.  At
each event exactly one of three things happens:

* ``original-first``: the original process renews strictly before the
  stationary copy's scheduled renewal.  Both get fresh draws from the
  coupled pair sampler: the original's next period from its law, the
  stationary copy's schedule *overwritten* by a fresh equilibrium residual
  (with its age redrawn from the matching residual construction).  With
  probability equal to the overlap mass the two draws are the same number,
  and the processes will land on a common epoch;
* ``stationary-first``: the stationary copy renews alone and draws a plain
  period;
* ``coincide``: the processes renew together -- the merge.  From then on
  they share every draw and are identical; the first such epoch is the
  coupling time tau.

Every ``original-first`` event is a coupling attempt succeeding with
probability kappa independently, so the attempt index is geometric.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .distributions import DelaySpec, DelayStart, Distribution, SpecError
from .splitting import SplitDecomposition
from .streams import Slot, UniformStream

__all__ = [
    "CouplingEvent",
    "CouplingTrace",
    "RenewalTrace",
    "TauSamples",
    "sample_xi_pair",
    "sample_xi_pairs",
    "simulate_independent_pair",
    "simulate_coupling",
    "state_at",
    "sample_tau",
    "probe_coupled_states",
    "sample_ages_at",
]

DEFAULT_MAX_EPOCHS = 10 ** 6


def sample_xi_pair(split: SplitDecomposition, u: float, u_common: float,
                   u_residual: float) -> tuple[float, float, bool]:
    """One coupled draw: the pair (original-law, equilibrium-law) variate.

    coincided is the structural event {selector below the overlap mass};
    when it holds both returns are the same inverse evaluation, so they
    are bit-identical.
    """
    kappa = split.kappa
    if u < kappa:
        v = split.inverse_phi(kappa * u_common)
        return v, v, True
    mass = (1.0 - kappa) * u_residual
    return split.inverse_psi(mass), split.inverse_psi_tilde(mass), False


def sample_xi_pairs(split: SplitDecomposition, u: np.ndarray, u_common: np.ndarray,
                    u_residual: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized coupled draws; same semantics as sample_xi_pair."""
    u = np.asarray(u, float)
    kappa = split.kappa
    coincided = u < kappa
    xi = np.empty_like(u)
    xi_t = np.empty_like(u)
    if coincided.any():
        common = split.inverse_phi_array(kappa * np.asarray(u_common, float)[coincided])
        xi[coincided] = common
        xi_t[coincided] = common
    rest = ~coincided
    if rest.any():
        mass = (1.0 - kappa) * np.asarray(u_residual, float)[rest]
        xi[rest] = split.inverse_psi_array(mass)
        xi_t[rest] = split.inverse_psi_tilde_array(mass)
    return xi, xi_t, coincided


def _overshoot_quantile(d: Distribution, age: float, y: float) -> float:
    """Quantile of the residual-period law at the given elapsed age."""
    fa = d.cdf(age)
    surv = 1.0 - fa
    if surv <= 0.0:
        return 0.0
    return max(d.quantile(fa + y * surv), age) - age


def _overshoot_quantile_array(d: Distribution, ages: np.ndarray,
                              y: np.ndarray) -> np.ndarray:
    fa = d.cdf_array(ages)
    surv = np.maximum(1.0 - fa, 1e-300)
    target = np.minimum(fa + np.asarray(y, float) * surv, 1.0 - 1e-16)
    return np.maximum(d.quantile_array(target) - ages, 0.0)


class CouplingEvent(NamedTuple):
    index: int
    time: float
    case: str               # original-first | stationary-first | coincide | merged-renewal
    attempt: int | None     # attempt counter at original-first events
    coincided: bool | None  # whether the coupled draw fell in the common part
    z_age: float            # original's age right at this epoch
    zt_age: float           # stationary copy's age right at this epoch


@dataclass
class _StartState:
    delay_draw: float
    z_age0: float
    zt_age0: float
    stat_first: float


def _start_state(d: Distribution, split: SplitDecomposition | None, start: DelayStart,
                 stream: UniformStream, replica: int) -> _StartState:
    delay_draw = start.dist.quantile(stream.uniform(replica, 0, Slot.PERIOD))
    u_first = stream.uniform(replica, 0, Slot.COMMON)
    if split is not None:
        stat_first = split.equilibrium_quantile(u_first)
    else:
        stat_first = d.equilibrium().quantile(u_first)
    zt_age0 = _overshoot_quantile(d, stat_first, stream.uniform(replica, 0, Slot.RESIDUAL))
    if start.initial_age is None:
        # stationary start for the original process too
        z_age0 = _overshoot_quantile(d, delay_draw, stream.uniform(replica, 0, Slot.AGE))
    else:
        z_age0 = start.initial_age
    return _StartState(delay_draw, z_age0, zt_age0, stat_first)


def _coupling_events(d: Distribution, split: SplitDecomposition, init: _StartState,
                     stream: UniformStream, replica: int,
                     max_epochs: int) -> Iterator[CouplingEvent]:
    kappa = split.kappa
    t_next = init.delay_draw
    ts_next = init.stat_first
    seg_start = 0.0
    z_off = init.z_age0
    zt_off = init.zt_age0
    merged = False
    pending_merge = False
    attempt = 0

    for n in range(1, max_epochs + 1):
        if merged or pending_merge:
            time = t_next
            case = "merged-renewal" if merged else "coincide"
            if pending_merge:
                merged, pending_merge = True, False
            draw = d.quantile(stream.uniform(replica, n, Slot.PERIOD))
            t_next = ts_next = time + draw
            z_off = zt_off = 0.0
            seg_start = time
            yield CouplingEvent(n, time, case, None, None, 0.0, 0.0)
        elif ts_next < t_next:
            time = ts_next
            z_off = z_off + (time - seg_start)
            zt_off = 0.0
            seg_start = time
            ts_next = time + d.quantile(stream.uniform(replica, n, Slot.PERIOD))
            yield CouplingEvent(n, time, "stationary-first", None, None, z_off, 0.0)
        else:
            # the original process renews first (exact ties resolve here too)
            time = t_next
            attempt += 1
            u = stream.uniform(replica, n, Slot.PERIOD)
            coincided = u < kappa
            if coincided:
                xi = xi_t = split.inverse_phi(kappa * stream.uniform(replica, n, Slot.COMMON))
            else:
                mass = (1.0 - kappa) * stream.uniform(replica, n, Slot.RESIDUAL)
                xi = split.inverse_psi(mass)
                xi_t = split.inverse_psi_tilde(mass)
            t_next = time + xi
            ts_next = time + xi_t  # discard the stationary copy's old schedule
            zt_off = _overshoot_quantile(d, xi_t, stream.uniform(replica, n, Slot.AGE))
            z_off = 0.0
            seg_start = time
            pending_merge = coincided
            yield CouplingEvent(n, time, "original-first", attempt, coincided, 0.0, zt_off)


@dataclass
class CouplingTrace:
    """Full event record of one coupled replica."""

    replica: int
    delay_draw: float
    z_age0: float
    zt_age0: float
    stat_first_renewal: float
    events: list[CouplingEvent]
    tau: float | None
    coupling_attempt: int | None
    horizon: float
    censored: bool

    @property
    def epochs_original(self) -> list[float]:
        return [e.time for e in self.events
                if e.case in ("original-first", "coincide", "merged-renewal")]

    @property
    def epochs_stationary(self) -> list[float]:
        return [e.time for e in self.events
                if e.case in ("stationary-first", "coincide", "merged-renewal")]

    def state_at(self, t: float) -> tuple[float, float]:
        """Ages (original, stationary) at time t within the simulated span."""
        if t < 0.0 or t > self.horizon:
            raise SpecError(f"time {t!r} outside the simulated horizon {self.horizon!r}")
        times = [e.time for e in self.events]
        j = bisect.bisect_right(times, t) - 1
        if j < 0:
            return t + self.z_age0, t + self.zt_age0
        e = self.events[j]
        return (t - e.time) + e.z_age, (t - e.time) + e.zt_age

    def as_jsonl_record(self) -> dict:
        return {
            "replica": self.replica,
            "delay_draw": self.delay_draw,
            "initial_age": self.z_age0,
            "stationary_initial_age": self.zt_age0,
            "stationary_first_renewal": self.stat_first_renewal,
            "tau": self.tau,
            "coupling_attempt": self.coupling_attempt,
            "censored": self.censored,
            "events": [
                {"t": e.time, "case": e.case, "attempt": e.attempt,
                 "coincided": e.coincided} for e in self.events
            ],
        }


def state_at(trace: CouplingTrace, t: float) -> tuple[float, float]:
    return trace.state_at(t)


def simulate_coupling(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
                      stream: UniformStream, replica: int = 0,
                      max_epochs: int = DEFAULT_MAX_EPOCHS,
                      horizon: float | None = None) -> CouplingTrace:
    """Run one replica until it merges (and to the horizon, if given)."""
    init = _start_state(d, split, delay.resolve(d), stream, replica)
    events: list[CouplingEvent] = []
    tau = None
    attempt = None
    for e in _coupling_events(d, split, init, stream, replica, max_epochs):
        events.append(e)
        if e.case == "coincide" and tau is None:
            tau = e.time
            attempt = next(ev.attempt for ev in reversed(events)
                           if ev.case == "original-first")
        done_horizon = horizon is None or e.time > horizon
        if tau is not None and done_horizon:
            break
    censored = tau is None
    top = events[-1].time if events else 0.0
    return CouplingTrace(
        replica=replica, delay_draw=init.delay_draw, z_age0=init.z_age0,
        zt_age0=init.zt_age0, stat_first_renewal=init.stat_first,
        events=events, tau=tau, coupling_attempt=attempt,
        horizon=top, censored=censored,
    )


@dataclass
class TauSamples:
    """Coupling-time draws across independent replicas."""

    taus: np.ndarray        # nan where censored
    attempts: np.ndarray    # attempt index of the successful try (0 = censored)
    n_censored: int
    seed: int

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.taus))

    @property
    def se(self) -> float:
        ok = self.taus[~np.isnan(self.taus)]
        return float(np.std(ok, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else math.inf

    def tail_prob(self, t: float) -> float:
        """P{tau > t}, counting censored replicas as exceeding t."""
        exceed = np.isnan(self.taus) | (self.taus > t)
        return float(np.mean(exceed))

    def summary(self) -> dict:
        return {
            "n": int(len(self.taus)),
            "n_censored": self.n_censored,
            "mean": self.mean,
            "se": self.se,
            "seed": self.seed,
        }


def sample_tau(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
               n_replicas: int, seed: int,
               max_epochs: int = DEFAULT_MAX_EPOCHS) -> TauSamples:
    """Independent coupling-time draws, one stream replica each."""
    if n_replicas < 1:
        raise SpecError("n_replicas must be at least 1")
    stream = UniformStream(seed)
    start = delay.resolve(d)
    taus = np.full(n_replicas, np.nan)
    attempts = np.zeros(n_replicas, dtype=np.int64)
    censored = 0
    for r in range(n_replicas):
        init = _start_state(d, split, start, stream, r)
        got = False
        for e in _coupling_events(d, split, init, stream, r, max_epochs):
            if e.case == "coincide":
                taus[r] = e.time
                got = True
                break
            if e.case == "original-first":
                attempts[r] = e.attempt
        if not got:
            censored += 1
            attempts[r] = 0
    return TauSamples(taus=taus, attempts=attempts, n_censored=censored, seed=seed)


def probe_coupled_states(d: Distribution, split: SplitDecomposition, delay: DelaySpec,
                         times: Sequence[float], n_replicas: int, seed: int,
                         max_epochs: int = DEFAULT_MAX_EPOCHS
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ages of both coupled processes at each probe time, across replicas.

    Returns (z_ages, zt_ages, taus) with age arrays shaped
    (len(times), n_replicas).  Censored replicas get tau = nan.
    """
    times = sorted(float(t) for t in times)
    if times and times[0] < 0:
        raise SpecError("probe times must be nonnegative")
    horizon = times[-1] if times else 0.0
    stream = UniformStream(seed)
    start = delay.resolve(d)
    z_out = np.empty((len(times), n_replicas))
    zt_out = np.empty((len(times), n_replicas))
    taus = np.full(n_replicas, np.nan)
    for r in range(n_replicas):
        init = _start_state(d, split, start, stream, r)
        seg_start = 0.0
        z_off = init.z_age0
        zt_off = init.zt_age0
        ti = 0
        tau = None
        for e in _coupling_events(d, split, init, stream, r, max_epochs):
            while ti < len(times) and times[ti] < e.time:
                dt = times[ti] - seg_start
                z_out[ti, r] = z_off + dt
                zt_out[ti, r] = zt_off + dt
                ti += 1
            seg_start, z_off, zt_off = e.time, e.z_age, e.zt_age
            if e.case == "coincide" and tau is None:
                tau = e.time
            if tau is not None and e.time > horizon and ti >= len(times):
                break
        while ti < len(times):  # censored past max_epochs; extend last segment
            dt = times[ti] - seg_start
            z_out[ti, r] = z_off + dt
            zt_out[ti, r] = zt_off + dt
            ti += 1
        taus[r] = math.nan if tau is None else tau
    return z_out, zt_out, taus


@dataclass
class RenewalTrace:
    """Epochs of one (uncoupled) renewal process plus its age convention."""

    epochs: list[float]
    initial_age: float
    horizon: float

    def age_at(self, t: float) -> float:
        if t < 0.0 or t > self.horizon:
            raise SpecError(f"time {t!r} outside the simulated horizon")
        last = None
        for ep in self.epochs:
            if ep <= t:
                last = ep
            else:
                break
        return t + self.initial_age if last is None else t - last


def simulate_independent_pair(d: Distribution, delay: DelaySpec, horizon: float,
                              stream: UniformStream, replica: int = 0
                              ) -> tuple[RenewalTrace, RenewalTrace]:
    """The two processes built independently (no coupling), for cross-checks."""
    if not horizon >= 0.0:
        raise SpecError("horizon must be nonnegative")
    start = delay.resolve(d)
    init = _start_state(d, None, start, stream, replica)

    epochs1 = [init.delay_draw]
    n = 1
    while epochs1[-1] <= horizon:
        epochs1.append(epochs1[-1] + d.quantile(stream.uniform(replica, n, Slot.PERIOD)))
        n += 1
    trace1 = RenewalTrace(epochs1, init.z_age0, horizon)

    epochs2 = [init.stat_first]
    n = 1
    while epochs2[-1] <= horizon:
        epochs2.append(epochs2[-1] + d.quantile(stream.uniform(replica, n, Slot.COMMON)))
        n += 1
    trace2 = RenewalTrace(epochs2, init.zt_age0, horizon)
    return trace1, trace2


def sample_ages_at(d: Distribution, delay: DelaySpec, times: Sequence[float],
                   n_replicas: int, seed: int) -> np.ndarray:
    """Vectorized ages of the uncoupled delayed process at each probe time.

    Shares one renewal path per replica across all probe times (each
    marginal is exactly the age law at that time).  Returns an array of
    shape (len(times), n_replicas).
    """
    grid = [float(t) for t in times]
    if any(b < a for a, b in zip(grid[:-1], grid[1:])):
        raise SpecError("probe times must be sorted ascending")
    if grid and grid[0] < 0:
        raise SpecError("probe times must be nonnegative")
    stream = UniformStream(seed)
    start = delay.resolve(d)
    idx = np.arange(n_replicas, dtype=np.int64)

    s_next = start.dist.quantile_array(stream.uniform_replicas(idx, 0, Slot.PERIOD))
    if start.initial_age is None:
        ages0 = _overshoot_quantile_array(
            d, s_next, stream.uniform_replicas(idx, 0, Slot.AGE))
        last = -ages0
    else:
        last = np.full(n_replicas, -start.initial_age)

    out = np.empty((len(grid), n_replicas))
    step = 0
    for ti, t in enumerate(grid):
        while True:
            active = np.flatnonzero(s_next <= t)
            if active.size == 0:
                break
            last[active] = s_next[active]
            step += 1
            if step > 10 ** 7:
                raise RuntimeError("age sampler exceeded its step budget")
            u = stream.uniform_replicas(active, step, Slot.PERIOD)
            s_next[active] += d.quantile_array(u)
        out[ti] = t - last
    return out
