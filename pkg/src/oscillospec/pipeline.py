"""One comparison point: oscillatory vs effective vs closed form at (eps, alpha)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .asymptotics import (
    CriticalReference,
    DressingMap,
    critical_reference,
    hermite_limit,
    l2_distance,
    regime_of,
    semiclassical_prediction,
    superposition_check,
    weak_coupling_prediction,
    weak_coupling_profile,
)
from .cache import cached_spectral
from .cell import CellSolution
from .effective import (
    AGMON_TARGET,
    V0_bandwidth,
    choose_domain,
    effective_potential,
    line_modes,
    round_L,
    solve_effective,
)
from .normalform import PhaseExpansion
from .oscillatory import SpectralResult, min_grid, mode_set, solve_oscillatory

DEFAULT_L_CAP = 1500.0


@dataclass(frozen=True)
class PointParams:
    L: float
    n: int
    N: int
    N_grid: int

    def to_dict(self):
        return asdict(self)


def auto_params(cell: CellSolution, eps: float, alpha: float, count: int = 1, L_cap: float = DEFAULT_L_CAP,
                target: float = AGMON_TARGET, L: float | None = None) -> PointParams:
    """Box holding the lowest ``count`` effective states (capped), and matching bandwidths.

    The restricted bands use the same width as the effective basis: in both
    cases it is set by the slow bandwidth of V0 and by the eigenfunctions.
    """
    W = effective_potential(cell, eps, alpha, include_V1=True)
    xi = eps**alpha * V0_bandwidth(cell)
    if L is None:
        dc = choose_domain(W, 1.0, count, eps_fast=eps, xi=xi, L_cap=L_cap, target=target)
        L = min(dc.L, round_L(L_cap, eps))
    L = round_L(L, eps)
    wmin = float(np.min(W(np.linspace(-L, L, 4001))))
    N = line_modes(W, 1.0, L, 0.0, wmin, xi=xi)
    ms = mode_set(L, eps, N)
    return PointParams(float(L), int(N), int(N), min_grid(ms.kmax))


@dataclass
class PointResult:
    eps: float
    alpha: float
    params: PointParams
    osc: SpectralResult
    eff: SpectralResult
    eff0: SpectralResult
    records: list = field(default_factory=list)


def formula(cell: CellSolution, eps: float, alpha: float, n: int, crit=None):
    reg = regime_of(alpha)
    try:
        if reg == "semiclassical":
            return semiclassical_prediction(cell, eps, alpha, n)
        if reg == "weak-coupling":
            return weak_coupling_prediction(cell, eps, alpha) if n == 1 else None
        crit = crit or critical_reference(cell)
        return crit.prediction(eps, n)
    except ValueError:
        return None


def model_function(cell, eps, alpha, n, x, crit=None):
    """Regime model eigenfunction (Hermite, exponential or rescaled critical state)."""
    reg = regime_of(alpha)
    try:
        if reg == "semiclassical":
            return hermite_limit(cell, eps, alpha, n, x)
        if reg == "weak-coupling":
            return weak_coupling_profile(cell, eps, alpha, x) if n == 1 else None
        crit = crit or critical_reference(cell)
        return crit.profile(eps, n, x)
    except ValueError:
        return None


def grid_size(params: PointParams, eps: float, kmax: int) -> int:
    """Power of two resolving the modes and giving step <= eps/16."""
    need = max(2 * kmax + 2, int(math.ceil(32.0 * params.L / eps)))
    return 1 << int(math.ceil(math.log2(need)))


def compare_point(cell: CellSolution, eps: float, alpha: float, count: int = 1, params: PointParams | None = None,
                  functions: bool = True, crit=None, pe: PhaseExpansion | None = None, cache=None) -> PointResult:
    params = params or auto_params(cell, eps, alpha, count)
    pot = cell.potential
    spec = pot.to_spec()
    base = dict(potential=spec, eps=eps, alpha=alpha, L=params.L, count=count)
    osc = cached_spectral(cache, "osc", lambda: solve_oscillatory(pot, eps, alpha, params.L, params.N_grid,
                                                                  params.n, count),
                          N_grid=params.N_grid, n=params.n, **base)
    eff = cached_spectral(cache, "eff", lambda: solve_effective(cell, eps, alpha, True, count, params.L, params.N),
                          N=params.N, include_V1=True, **base)
    v1_zero = cell.integral_absV0 > 0 and _v1_vanishes(cell)
    eff0 = eff if v1_zero else cached_spectral(
        cache, "eff", lambda: solve_effective(cell, eps, alpha, False, count, params.L, params.N),
        N=params.N, include_V1=False, **base)
    if regime_of(alpha) == "critical" and crit is None:
        crit = cached_critical(cell, cache)
    out = PointResult(eps, alpha, params, osc, eff, eff0)
    if functions:
        npts = grid_size(params, eps, int(np.max(np.abs(osc.modes))))
        x = osc.grid(npts)
        psi = osc.on_grid(npts)
        phi = eff.on_grid(npts)
        phi0 = eff0.on_grid(npts)
        pe = pe or PhaseExpansion(cell)
        dm = DressingMap(pe, eps, alpha, x)
    for i in range(min(count, osc.count, eff.count)):
        n = i + 1
        lo, le = float(osc.eigenvalues[i]), float(eff.eigenvalues[i])
        lf = formula(cell, eps, alpha, n, crit)
        rec = {"epsilon": eps, "alpha": alpha, "n": n, "lambda_osc": lo, "lambda_eff": le,
               "lambda_eff0": float(eff0.eigenvalues[i]), "lambda_formula": lf,
               "err_eff": abs(lo - le), "err_formula": None if lf is None else abs(lo - lf),
               "d_raw": None, "d_dressed": None, "d_simple": None, "d_eff0": None, "d_model": None,
               "d_eff0_model": None}
        if functions:
            sp = superposition_check(x, psi[i], phi[i], dressing=dm)
            rec.update(d_raw=sp.d_raw, d_dressed=sp.d_dressed, d_simple=sp.d_simple,
                       d_eff0=l2_distance(x, psi[i], phi0[i]))
            mf = model_function(cell, eps, alpha, n, x, crit)
            if mf is not None:
                rec["d_model"] = l2_distance(x, psi[i], mf)
                rec["d_eff0_model"] = l2_distance(x, phi0[i], mf)
        out.records.append(rec)
    return out


def cached_critical(cell: CellSolution, cache=None, count: int = 4):
    res = cached_spectral(cache, "critical", lambda: critical_reference(cell, count).result,
                          potential=cell.potential.to_spec(), count=count)
    return CriticalReference(res)


def _v1_vanishes(cell: CellSolution) -> bool:
    X = np.linspace(-15.0, 15.0, 301)
    return bool(np.max(np.abs(cell.V1(X))) == 0.0)
