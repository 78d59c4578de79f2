"""Common-part decomposition of a period law and its equilibrium law.

The coupled sampler rests on splitting F and its equilibrium law Ftilde by
the pointwise minimum of their densities:

    phi(s)   = min(F'(s), Ftilde'(s))   where F' exists, else 0
    Phi(s)   = integral of phi on [0, s],   kappa = Phi(inf) in (0, 1]
    Psi      = F - Phi,   PsiTilde = Ftilde - Phi   (the residual parts)

kappa is the probability that one coupled draw lands in the common part,
i.e. that the two processes can merge at that renewal.

The decomposition is tabulated on an adaptive grid whose cells never
straddle a density crossing, so each cell's Phi increment is an exact cdf
difference of whichever law has the smaller density there.  Inverses are
generalized inverses: the grid locates the cell, and the exact in-cell
expression is inverted either through the underlying quantile function
(cells where the period density is the smaller one) or by monotone
bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, SpecError, from_spec
from .quadrature import DivergentIntegral, adaptive_simpson, tail_integral

__all__ = ["SplitDecomposition", "SplitError", "compute_split", "phi_at"]

_TAIL_EPS = 1e-14
_INVERSE_TOL = 1e-12
_DEGENERATE_GAP = 1e-12


class SplitError(ValueError):
    """The decomposition cannot be built (degenerate overlap, bad input)."""


def _pdf0(d: Distribution, s: float) -> float:
    f = d.pdf(s)
    return 0.0 if f is None else f


def phi_at(d: Distribution, s: float, eq: Distribution | None = None) -> float:
    """Density of the common part at s: min of the two densities, 0 at kinks."""
    if s < 0:
        return 0.0
    if eq is None:
        eq = d.equilibrium()
    f = d.pdf(s)
    if f is None:
        return 0.0
    g = eq.pdf(s)
    if g is None:
        return 0.0
    return min(f, g)


def _find_crossings(d, eq, lo, hi, tol_x, samples=65):
    """Sign changes of f - ftilde strictly inside (lo, hi)."""
    xs = np.linspace(lo, hi, samples + 2)[1:-1]
    gs = np.array([_pdf0(d, x) - _pdf0(eq, x) for x in xs])
    signs = np.sign(gs)
    out = []
    for i in range(len(xs) - 1):
        if signs[i] * signs[i + 1] < 0:
            a, b = xs[i], xs[i + 1]
            ga = gs[i]
            while b - a > tol_x:
                m = 0.5 * (a + b)
                gm = _pdf0(d, m) - _pdf0(eq, m)
                if gm == 0.0:
                    a = b = m
                    break
                if (gm > 0) == (ga > 0):
                    a, ga = m, gm
                else:
                    b = m
            out.append(0.5 * (a + b))
    return out


@dataclass
class SplitDecomposition:
    """Tabulated Phi/Psi/PsiTilde with exact in-cell evaluation and inverses."""

    dist: Distribution
    eq: Distribution
    kappa: float
    kappa_err: float
    nodes: np.ndarray
    phi_nodes: np.ndarray
    psi_nodes: np.ndarray
    psi_tilde_nodes: np.ndarray
    f_nodes: np.ndarray       # F at nodes
    fac_nodes: np.ndarray     # absolutely continuous part of F at nodes
    feq_nodes: np.ndarray     # equilibrium cdf at nodes
    branch_f: np.ndarray      # per cell: True when the smaller density is F's
    degenerate: bool
    grid_tol: float

    # -- forward evaluation -------------------------------------------------

    def phi(self, s: float) -> float:
        if self.degenerate:
            return self.dist.cdf(s)
        if s <= self.nodes[0]:
            return 0.0
        if s >= self.nodes[-1]:
            return self.kappa
        j = int(np.searchsorted(self.nodes, s, side="right")) - 1
        return self._phi_incell(j, s)

    def _phi_incell(self, j: int, s: float) -> float:
        if self.branch_f[j]:
            inc = self.dist.cdf_ac(s) - self.fac_nodes[j]
        else:
            inc = self.eq.cdf(s) - self.feq_nodes[j]
        return float(self.phi_nodes[j]) + max(inc, 0.0)

    def psi(self, s: float) -> float:
        if self.degenerate:
            return 0.0
        return max(self.dist.cdf(s) - self.phi(s), 0.0)

    def psi_tilde(self, s: float) -> float:
        if self.degenerate:
            return 0.0
        return max(self.eq.cdf(s) - self.phi(s), 0.0)

    def _psi_incell(self, j: int, s: float) -> float:
        return self.dist.cdf(s) - self._phi_incell(j, s)

    def _psi_tilde_incell(self, j: int, s: float) -> float:
        return self.eq.cdf(s) - self._phi_incell(j, s)

    # -- generalized inverses ------------------------------------------------

    def inverse_phi(self, y: float) -> float:
        if self.degenerate:
            if not 0.0 <= y < 1.0:
                raise SpecError(f"inverse_phi argument {y!r} outside [0, 1)")
            return self.dist.quantile(y)
        if not 0.0 <= y < self.kappa:
            raise SpecError(f"inverse_phi argument {y!r} outside [0, kappa)")
        if y <= self.phi_nodes[0]:
            return 0.0
        j = int(np.searchsorted(self.phi_nodes, y, side="left")) - 1
        j = min(max(j, 0), len(self.nodes) - 2)
        if self.branch_f[j]:
            # within the cell Phi and F rise in lockstep: invert F directly
            return self.dist.quantile(min(self.f_nodes[j] + (y - self.phi_nodes[j]),
                                          1.0 - 1e-16))
        return self._bisect_cell(self._phi_incell, j, y)

    def inverse_psi(self, y: float) -> float:
        if self.degenerate:
            return 0.0  # residual part is empty; convention value
        if not 0.0 <= y < 1.0 - self.kappa:
            raise SpecError(f"inverse_psi argument {y!r} outside [0, 1-kappa)")
        if y <= self.psi_nodes[0]:
            return 0.0
        j = int(np.searchsorted(self.psi_nodes, y, side="left")) - 1
        j = min(max(j, 0), len(self.nodes) - 2)
        return self._bisect_cell(self._psi_incell, j, y)

    def inverse_psi_tilde(self, y: float) -> float:
        if self.degenerate:
            return 0.0
        if not 0.0 <= y < 1.0 - self.kappa:
            raise SpecError(f"inverse_psi_tilde argument {y!r} outside [0, 1-kappa)")
        if y <= self.psi_tilde_nodes[0]:
            return 0.0
        j = int(np.searchsorted(self.psi_tilde_nodes, y, side="left")) - 1
        j = min(max(j, 0), len(self.nodes) - 2)
        return self._bisect_cell(self._psi_tilde_incell, j, y)

    def equilibrium_quantile(self, y: float) -> float:
        """Fast generalized inverse of the equilibrium cdf via the grid."""
        if not 0.0 <= y < 1.0:
            raise SpecError(f"probability argument must lie in [0, 1), got {y!r}")
        if self.degenerate:
            return self.dist.quantile(y)
        if y >= self.feq_nodes[-1]:
            return self.eq.quantile(y)  # beyond the grid's resolved tail
        if y <= 0.0:
            return 0.0
        j = int(np.searchsorted(self.feq_nodes, y, side="left")) - 1
        j = min(max(j, 0), len(self.nodes) - 2)
        return self._bisect_cell(lambda _j, s: self.eq.cdf(s), j, y)

    def _bisect_cell(self, incell, j: int, y: float) -> float:
        lo = float(self.nodes[j])
        hi = float(self.nodes[j + 1])
        tol = _INVERSE_TOL * max(1.0, float(self.nodes[-1]))
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if incell(j, mid) >= y:
                hi = mid
            else:
                lo = mid
        return hi

    # -- vectorized inverses (hot path of the pair sampler) -------------------

    def inverse_phi_array(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, float)
        if self.degenerate:
            return self.dist.quantile_array(y)
        cells = np.clip(np.searchsorted(self.phi_nodes, y, side="left") - 1,
                        0, len(self.nodes) - 2)
        out = np.empty_like(y)
        direct = self.branch_f[cells]
        if direct.any():
            j = cells[direct]
            target = np.minimum(self.f_nodes[j] + (y[direct] - self.phi_nodes[j]),
                                1.0 - 1e-16)
            out[direct] = self.dist.quantile_array(target)
        rest = ~direct
        if rest.any():
            out[rest] = self._bisect_cells(self._phi_array, cells[rest], y[rest])
        return np.where(y <= self.phi_nodes[0], 0.0, out)

    def inverse_psi_array(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, float)
        if self.degenerate:
            return np.zeros_like(y)
        cells = np.clip(np.searchsorted(self.psi_nodes, y, side="left") - 1,
                        0, len(self.nodes) - 2)
        out = self._bisect_cells(self._psi_array, cells, y)
        return np.where(y <= self.psi_nodes[0], 0.0, out)

    def inverse_psi_tilde_array(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, float)
        if self.degenerate:
            return np.zeros_like(y)
        cells = np.clip(np.searchsorted(self.psi_tilde_nodes, y, side="left") - 1,
                        0, len(self.nodes) - 2)
        out = self._bisect_cells(self._psi_tilde_array, cells, y)
        return np.where(y <= self.psi_tilde_nodes[0], 0.0, out)

    def _phi_array(self, s: np.ndarray, cells: np.ndarray) -> np.ndarray:
        inc = np.where(
            self.branch_f[cells],
            _cdf_ac_array(self.dist, s) - self.fac_nodes[cells],
            self.eq.cdf_array(s) - self.feq_nodes[cells],
        )
        return self.phi_nodes[cells] + np.maximum(inc, 0.0)

    def _psi_array(self, s, cells):
        return self.dist.cdf_array(s) - self._phi_array(s, cells)

    def _psi_tilde_array(self, s, cells):
        return self.eq.cdf_array(s) - self._phi_array(s, cells)

    def _bisect_cells(self, fn, cells, y):
        lo = self.nodes[cells].copy()
        hi = self.nodes[cells + 1].copy()
        tol = _INVERSE_TOL * max(1.0, float(self.nodes[-1]))
        for _ in range(64):
            if float(np.max(hi - lo)) <= tol:
                break
            mid = 0.5 * (lo + hi)
            ge = fn(mid, cells) >= y
            hi = np.where(ge, mid, hi)
            lo = np.where(ge, lo, mid)
        return hi

    # -- Laplace functional of the residual part ------------------------------

    def laplace_psi(self, a: float) -> float:
        """Exponentially weighted residual mass: integral of exp(a s) dPsi.

        Returns 1 - kappa exactly at a = 0 and math.inf when the weighted
        integral fails to converge.
        """
        if a < 0:
            raise SpecError("rate must be nonnegative")
        if self.degenerate:
            return 0.0
        if a == 0.0:
            return 1.0 - self.kappa
        total = sum(mass * math.exp(a * pos) for pos, mass in self.dist.atoms())

        def integrand(u):
            diff = _pdf0(self.dist, u) - _pdf0(self.eq, u)
            return math.exp(a * u) * diff if diff > 0.0 else 0.0

        for j in range(len(self.nodes) - 1):
            if self.branch_f[j]:
                continue  # residual density is zero where F's density is smaller
            lo = float(self.nodes[j])
            hi = float(self.nodes[j + 1])
            delta = 1e-12 * (hi - lo)
            val, _ = adaptive_simpson(integrand, lo + delta, hi - delta, self.grid_tol)
            total += val
            if total > 1e15:
                return math.inf
        upper = self.dist.support_upper()
        T = float(self.nodes[-1])
        if not (math.isfinite(upper) and upper <= T):
            try:
                tail, _ = tail_integral(integrand, T, self.dist.scale_hint(),
                                        tol=self.grid_tol)
            except (DivergentIntegral, OverflowError):
                return math.inf
            total += tail
        return total if total <= 1e15 else math.inf

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "schema": "regenbound/split/1",
            "dist": self.dist.spec_dict(),
            "kappa": self.kappa,
            "kappa_err": self.kappa_err,
            "nodes": self.nodes.tolist(),
            "phi_nodes": self.phi_nodes.tolist(),
            "psi_nodes": self.psi_nodes.tolist(),
            "psi_tilde_nodes": self.psi_tilde_nodes.tolist(),
            "f_nodes": self.f_nodes.tolist(),
            "fac_nodes": self.fac_nodes.tolist(),
            "feq_nodes": self.feq_nodes.tolist(),
            "branch_f": self.branch_f.astype(int).tolist(),
            "degenerate": self.degenerate,
            "grid_tol": self.grid_tol,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitDecomposition":
        payload = json.loads(text)
        dist = from_spec(payload["dist"])
        return cls(
            dist=dist,
            eq=dist.equilibrium(),
            kappa=payload["kappa"],
            kappa_err=payload["kappa_err"],
            nodes=np.asarray(payload["nodes"], float),
            phi_nodes=np.asarray(payload["phi_nodes"], float),
            psi_nodes=np.asarray(payload["psi_nodes"], float),
            psi_tilde_nodes=np.asarray(payload["psi_tilde_nodes"], float),
            f_nodes=np.asarray(payload["f_nodes"], float),
            fac_nodes=np.asarray(payload["fac_nodes"], float),
            feq_nodes=np.asarray(payload["feq_nodes"], float),
            branch_f=np.asarray(payload["branch_f"], bool),
            degenerate=payload["degenerate"],
            grid_tol=payload["grid_tol"],
        )


def _cdf_ac_array(d: Distribution, s: np.ndarray) -> np.ndarray:
    vals = d.cdf_array(s)
    for pos, mass in d.atoms():
        vals = vals - mass * (np.asarray(s) >= pos)
    return vals


def _degenerate_split(d: Distribution, eq: Distribution, tol: float) -> SplitDecomposition:
    nodes = np.array([0.0, d.tail_cutoff(_TAIL_EPS)])
    ones = np.array([0.0, 1.0])
    return SplitDecomposition(
        dist=d, eq=eq, kappa=1.0, kappa_err=0.0,
        nodes=nodes,
        phi_nodes=ones.copy(),
        psi_nodes=np.zeros(2),
        psi_tilde_nodes=np.zeros(2),
        f_nodes=ones.copy(),
        fac_nodes=ones.copy(),
        feq_nodes=ones.copy(),
        branch_f=np.array([True]),
        degenerate=True,
        grid_tol=tol,
    )


def compute_split(d: Distribution, tol: float = 1e-10) -> SplitDecomposition:
    """Build the common-part decomposition of a validated period law."""
    if tol <= 0:
        raise SpecError("split tolerance must be positive")
    eq = d.equilibrium()
    if eq == d:
        # the law equals its equilibrium law (memoryless): full overlap
        return _degenerate_split(d, eq, tol)

    T = max(d.tail_cutoff(_TAIL_EPS), _eq_cutoff(eq, d))
    special = {0.0, T}
    special.update(b for b in d.breakpoints() if 0.0 < b < T)
    special.update(b for b in eq.breakpoints() if 0.0 < b < T)
    special = sorted(special)

    tol_x = 1e-13 * max(1.0, T)
    markers = set(special)
    for lo, hi in zip(special[:-1], special[1:]):
        markers.update(_find_crossings(d, eq, lo, hi, tol_x))
    markers = sorted(markers)

    # refine each crossing-free interval so inverse lookups stay local
    nodes = [0.0]
    for lo, hi in zip(markers[:-1], markers[1:]):
        n_cells = int(np.clip(round((hi - lo) / T * 256), 8, 64))
        nodes.extend(np.linspace(lo, hi, n_cells + 1)[1:])
    nodes = np.array(nodes)

    mids = 0.5 * (nodes[:-1] + nodes[1:])
    branch_f = np.array([_pdf0(d, m) <= _pdf0(eq, m) for m in mids])

    fac_nodes = np.array([d.cdf_ac(float(s)) for s in nodes])
    feq_nodes = np.array([eq.cdf(float(s)) for s in nodes])
    incs = np.where(branch_f, np.diff(fac_nodes), np.diff(feq_nodes))
    incs = np.maximum(incs, 0.0)
    phi_nodes = np.concatenate([[0.0], np.cumsum(incs)])

    kappa = float(phi_nodes[-1])
    n_cross = max(len(markers) - len(special), 0)
    tail_gap = max(0.0, 1.0 - min(d.cdf(T), eq.cdf(T)))
    kappa_err = tail_gap + n_cross * tol_x + 1e-15 * len(mids)

    if kappa <= tol:
        raise SplitError(
            f"splitting degenerate: overlap mass {kappa:.3e} at working precision")
    if 1.0 - kappa <= _DEGENERATE_GAP:
        return _degenerate_split(d, eq, tol)

    f_nodes = d.cdf_array(nodes)
    psi_nodes = np.maximum(f_nodes - phi_nodes, 0.0)
    psi_tilde_nodes = np.maximum(feq_nodes - phi_nodes, 0.0)

    return SplitDecomposition(
        dist=d, eq=eq, kappa=kappa, kappa_err=kappa_err,
        nodes=nodes, phi_nodes=phi_nodes,
        psi_nodes=psi_nodes, psi_tilde_nodes=psi_tilde_nodes,
        f_nodes=f_nodes, fac_nodes=fac_nodes, feq_nodes=feq_nodes,
        branch_f=branch_f, degenerate=False, grid_tol=tol,
    )


def _eq_cutoff(eq: Distribution, base: Distribution) -> float:
    """Point where the equilibrium survival drops below the tail epsilon."""
    hi = base.tail_cutoff(_TAIL_EPS)
    upper = base.support_upper()
    if math.isfinite(upper):
        return upper
    for _ in range(200):
        if 1.0 - eq.cdf(hi) < _TAIL_EPS:
            return hi
        hi *= 1.5
    return hi
