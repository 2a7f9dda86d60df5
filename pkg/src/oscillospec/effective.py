"""Generic Fourier eigensolver for c D^2 + W(x) with smooth decaying W.

Every non-oscillatory operator of the lab is of this form: the effective
operators D^2 + eps^2 V0(eps^a x) (+ eps^(3+a) V1(eps^a x)), D^2 + V0, and
the rescaled c D^2 + V0.

Domains are chosen from the Agmon integral of the computed eigenvalues,
int sqrt((W - lambda)/c) dx >= S, so that periodization errors scale like
exp(-2 S); bandwidths come from the decay of the sampled DFT of W.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .cell import CellSolution
from .oscillatory import (
    SpectralResult,
    full_mode_set,
    grid_points,
    min_grid,
    potential_dft,
    solve_fourier,
)

log = logging.getLogger(__name__)

AGMON_TARGET = 12.0
DFT_TOL = 1e-10
MIN_L = 40.0
MAX_LINE_MODES = 6000


@dataclass(frozen=True)
class LineProblem:
    W: Callable = field(repr=False)
    kinetic: float = 1.0
    L: float = 40.0
    N: int = 256
    N_grid: int | None = None
    label: str = ""

    def __post_init__(self):
        if not self.kinetic > 0:
            raise ValueError("kinetic coefficient must be positive")
        if not (self.L > 0 and self.N >= 1):
            raise ValueError("need L > 0 and N >= 1")

    @property
    def grid_size(self) -> int:
        return self.N_grid or min_grid(self.N, floor=1024)

    def samples(self):
        return np.asarray(self.W(grid_points(self.L, self.grid_size)), float)


def solve_line(lp: LineProblem, count: int = 4, reference=None) -> SpectralResult:
    ms = full_mode_set(lp.L, lp.N)
    samples = lp.samples()
    tail = bandwidth_tail(samples, lp.N)
    edge = max(abs(samples[0]), abs(samples[samples.size // 2 - 1]))
    # a potential that is still large at the box edge has a kink there; its
    # slow DFT tail is harmless for states localized inside the box
    if tail > 1e3 * DFT_TOL and edge <= 1e-12 * np.max(np.abs(samples)):
        log.warning("potential spectrum not resolved by %d modes (tail %.1e)", lp.N, tail)
    meta = {"solver": "line", "label": lp.label, "kinetic": lp.kinetic, "L": lp.L, "N": lp.N,
            "N_grid": lp.grid_size, "dft_tail": tail}
    return solve_fourier(samples, lp.L, ms.indices, count, kinetic=lp.kinetic, reference=reference, meta=meta)


def bandwidth_tail(samples, N: int) -> float:
    """max |g_hat(m)| / max |g_hat| over N < |m| <= 2N (what the modes cannot see)."""
    G = np.abs(potential_dft(np.asarray(samples)))
    top = G.max()
    if top == 0.0:
        return 0.0
    m = np.arange(N + 1, min(2 * N, G.size // 2) + 1)
    if m.size == 0:
        return 0.0
    return float(max(G[m].max(), G[-m].max()) / top)


def dft_bandwidth(samples, tol: float = DFT_TOL) -> int:
    """Largest |m| with |g_hat(m)| > tol max |g_hat|."""
    G = np.abs(potential_dft(np.asarray(samples)))
    top = G.max()
    if top == 0.0:
        return 0
    npts = G.size
    m = np.fft.fftfreq(npts, 1.0 / npts).astype(int)
    big = np.abs(m[G > tol * top])
    return int(big.max()) if big.size else 0


def envelope_bandwidth(f, R: float, tol: float = DFT_TOL, npts: int = 1 << 13) -> float:
    """Angular frequency beyond which the DFT of f on [-2R, 2R] stays below tol (relative)."""
    if not (R > 0 and math.isfinite(R)):
        raise ValueError("need a finite support radius")
    span = 2.0 * R
    x = -span + np.arange(npts) * (2.0 * span / npts)
    return dft_bandwidth(f(x), tol) * math.pi / span


# -- effective potentials -------------------------------------------------

def effective_potential(cell: CellSolution, eps: float, alpha: float, include_V1: bool = False):
    a = eps**alpha
    e2 = eps * eps
    e3 = eps ** (3.0 + alpha)

    def W(x):
        X = a * np.asarray(x, float)
        out = e2 * cell.V0(X)
        if include_V1:
            out = out + e3 * cell.V1(X)
        return out

    return W


def slow_support(cell: CellSolution, rel_tol: float = 1e-16) -> float:
    R = cell.potential.support_radius(rel_tol)
    if math.isinf(R):
        # algebraic decay: fall back to a radius where the envelope is 1e-8
        R = cell.potential.support_radius(1e-8)
        R = 1e4 if math.isinf(R) else R
    return R


def V0_bandwidth(cell: CellSolution, tol: float = DFT_TOL) -> float:
    """Angular bandwidth of V0 in the slow variable X."""
    if cell.potential.is_zero:
        return 0.0
    return envelope_bandwidth(cell.V0, slow_support(cell), tol)


def coefficient_bandwidth(cell: CellSolution, tol: float = DFT_TOL) -> float:
    """Largest angular bandwidth of the y-coefficients q_m in X."""
    pot = cell.potential
    if pot.is_zero:
        return 0.0
    R = slow_support(cell)
    return max(envelope_bandwidth(lambda X, m=m: np.abs(pot.y_coefficient(m, X)), R, tol) for m in pot.harmonics
               if m > 0)


# -- automatic domain -----------------------------------------------------

def agmon_length(W, kinetic: float, lam: float, target: float = AGMON_TARGET, start: float = 10.0,
                 per_unit: int = 8) -> float:
    """Smallest L with int_0^{+-L} sqrt(max(W - lam, 0)/c) >= target on both sides.

    Returns inf when lam is not below the far-field value of W.
    """
    if lam >= 0.0:
        return math.inf
    out = 0.0
    for side in (1.0, -1.0):
        ext = start
        while True:
            n = max(2049, int(ext * per_unit))
            x = np.linspace(0.0, ext, n)
            f = np.sqrt(np.maximum(W(side * x) - lam, 0.0) / kinetic)
            S = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(x))])
            if S[-1] >= target:
                out = max(out, float(x[np.searchsorted(S, target)]))
                break
            if ext > 1e9:
                return math.inf
            ext *= 2.0
    return out


@dataclass(frozen=True)
class DomainChoice:
    L: float
    N: int
    N_grid: int
    eigenvalues: tuple = ()
    iterations: int = 0


def round_L(L: float, eps: float | None) -> float:
    """Round up so that 2L/eps is an integer (fast part periodic on the box)."""
    if eps is None or not math.isfinite(eps):
        return float(math.ceil(L))
    h = 0.5 * eps
    return float(math.ceil(L / h - 1e-9) * h)


def line_modes(W, kinetic: float, L: float, lam_top: float | None, wmin: float, tol: float = DFT_TOL,
               slack: float = 1.25, extra: int = 16, xi: float | None = None) -> int:
    """Mode count from the potential bandwidth (angular ``xi`` if known) and the local wavenumber."""
    if xi is None:
        npts = 1 << 16
        x = -L + np.arange(npts) * (2.0 * L / npts)
        m_pot = dft_bandwidth(W(x), tol)
    else:
        m_pot = xi * L / math.pi
    lam = 0.0 if lam_top is None else lam_top
    k_osc = math.sqrt(max(lam - wmin, 0.0) / kinetic) * L / math.pi
    return int(math.ceil(slack * (m_pot + 4.0 * k_osc))) + extra


def choose_domain(W, kinetic: float, count: int, eps_fast: float | None = None, L0: float = MIN_L,
                  target: float = AGMON_TARGET, L_cap: float = 1e5, max_iter: int = 6,
                  xi: float | None = None) -> DomainChoice:
    """Iterate solve -> Agmon length until the box holds the lowest ``count`` states.

    States that are not bound (lambda >= 0) do not constrain L.
    """
    L = round_L(max(L0, MIN_L), eps_fast)
    probe = np.linspace(-L, L, 4001)
    wmin = float(np.min(W(probe)))
    lam = None
    for it in range(1, max_iter + 1):
        N = min(line_modes(W, kinetic, L, None if lam is None else max(lam), wmin, xi=xi), MAX_LINE_MODES)
        Ng = min_grid(N, floor=1024)
        res = solve_line(LineProblem(W, kinetic, L, N, Ng), count)
        lam = res.eigenvalues
        bound = lam[lam < 0]
        need = agmon_length(W, kinetic, float(bound.max()), target) if bound.size else L
        need = min(need, L_cap)
        if need <= L * 1.0001:
            return DomainChoice(L, N, Ng, tuple(float(v) for v in lam), it)
        L = round_L(max(need, L), eps_fast)
    log.warning("domain iteration did not settle; using L=%.1f", L)
    return DomainChoice(L, N, Ng, tuple(float(v) for v in lam), max_iter)


def line_problem_for(cell: CellSolution, eps: float, alpha: float, include_V1: bool = False, count: int = 4,
                     L: float | None = None, N: int | None = None, target: float = AGMON_TARGET) -> LineProblem:
    W = effective_potential(cell, eps, alpha, include_V1)
    label = "eff" if include_V1 else "eff0"
    xi = eps**alpha * V0_bandwidth(cell)
    if L is None:
        dc = choose_domain(W, 1.0, count, eps_fast=eps, target=target, xi=xi)
        L = dc.L
        N = N or dc.N
    if N is None:
        wmin = float(np.min(W(np.linspace(-L, L, 4001))))
        N = min(line_modes(W, 1.0, L, 0.0, wmin, xi=xi), MAX_LINE_MODES)
    return LineProblem(W, 1.0, float(L), int(N), None, label)


def solve_effective(cell: CellSolution, eps: float, alpha: float, include_V1: bool = False, count: int = 4,
                    L: float | None = None, N: int | None = None) -> SpectralResult:
    """Eigenpairs of D^2 + eps^2 V0(eps^a x) (+ eps^(3+a) V1(eps^a x))."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    lp = line_problem_for(cell, eps, alpha, include_V1, count, L, N)
    res = solve_line(lp, count)
    res.meta.update({"eps": eps, "alpha": alpha, "include_V1": bool(include_V1),
                     "potential_hash": cell.potential.content_hash()})
    return res


def solve_rescaled(cell: CellSolution, kinetic: float, count: int = 4, L: float | None = None,
                   N: int | None = None) -> SpectralResult:
    """Eigenpairs of c D^2 + V0 (c = 1 is the critical reference operator)."""
    W = cell.V0
    xi = V0_bandwidth(cell)
    if L is None:
        dc = choose_domain(W, kinetic, count, xi=xi)
        L, N = dc.L, N or dc.N
    if N is None:
        N = min(line_modes(W, kinetic, L, 0.0, float(np.min(W(np.linspace(-L, L, 4001)))), xi=xi), MAX_LINE_MODES)
    return solve_line(LineProblem(W, kinetic, float(L), int(N), None, "rescaled"), count)


def with_resolution(lp: LineProblem, factor: float) -> LineProblem:
    return replace(lp, N=int(math.ceil(lp.N * factor)), N_grid=None)
