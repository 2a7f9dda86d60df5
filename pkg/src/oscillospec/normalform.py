"""Truncated phase, change of variable and reduced potential.

All D-expressions are used in their d-form (D = -i d).  With
delta = eps^(1+alpha) the phase phi = eps^2 Phi(eps^alpha x, x/eps) has

    Phi = P00 + delta P10 + delta^2 P20 + delta^3 P30 + eps^2 P01 + eps^2 delta P11

and the mean-zero profiles solve

    d_y^2 P00 = q
    d_y^2 Pk0 = -2 d_X d_y P(k-1)0 - d_X^2 P(k-2)0            (k = 1, 2, 3)
    d_y^2 P01 = -(d_y Q)^2 - V0
    d_y^2 P11 = -V1 - 2 d_X d_y P01 + 2 (d_X Q)(d_y Q)

which makes q - phi'' - phi'^2 = eps^2 V0 + eps^(3+alpha) V1 + O(eps^min(4, 4+4 alpha)).
The last equation is the order-(1,1) balance, so its unknown is P11.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._series import HStack
from .cell import CellSolution

PROFILE_NAMES = ("P00", "P10", "P20", "P30", "P01", "P11")
CHUNK = 1 << 15
GL_NODES = 6


def profile_stacks(cell: CellSolution, X, depth: int = 2) -> dict:
    """All six profiles at the points X, each with ``depth`` X-derivatives."""
    if depth > 2:
        raise ValueError("profiles carry at most two X-derivatives")
    q = HStack.from_potential(cell.potential, X, 5)
    Q = q.inv_dyy()
    P10 = (-2.0 * Q.dX().dy()).inv_dyy()
    P20 = (-2.0 * P10.dX().dy() - Q.dX(2)).inv_dyy()
    P30 = (-2.0 * P20.dX().dy() - P10.dX(2)).inv_dyy()
    Qy = Q.dy()
    P01 = (-(Qy * Qy)).zero_mean().inv_dyy()
    P11 = (-2.0 * P01.dX().dy() + 2.0 * (Q.dX() * Qy)).zero_mean().inv_dyy()
    out = {"P00": Q, "P10": P10, "P20": P20, "P30": P30, "P01": P01, "P11": P11}
    return {k: v.truncate(depth) for k, v in out.items()}


def combined_profile(cell: CellSolution, eps: float, alpha: float, X, depth: int = 2) -> HStack:
    st = profile_stacks(cell, X, depth)
    d = eps ** (1.0 + alpha)
    e2 = eps * eps
    return (
        st["P00"]
        + d * st["P10"]
        + d * d * st["P20"]
        + d**3 * st["P30"]
        + e2 * st["P01"]
        + e2 * d * st["P11"]
    )


@dataclass(frozen=True)
class PhaseExpansion:
    cell: CellSolution

    def profiles(self, X, depth: int = 2) -> dict:
        return profile_stacks(self.cell, np.atleast_1d(np.asarray(X, float)), depth)

    def _eval_chunk(self, eps, alpha, x, nderiv):
        X = eps**alpha * x
        y = x / eps
        Phi = combined_profile(self.cell, eps, alpha, X, depth=nderiv)
        phi = eps * eps * Phi.evaluate_real(y, 0)
        if nderiv == 0:
            return (phi,)
        Py = Phi.dy()
        dphi = eps ** (2 + alpha) * Phi.evaluate_real(y, 1) + eps * Py.evaluate_real(y, 0)
        if nderiv == 1:
            return phi, dphi
        ddphi = (
            eps ** (2 + 2 * alpha) * Phi.evaluate_real(y, 2)
            + 2 * eps ** (1 + alpha) * Py.evaluate_real(y, 1)
            + Py.dy().evaluate_real(y, 0)
        )
        return phi, dphi, ddphi

    def evaluate(self, eps: float, alpha: float, x, nderiv: int = 2):
        """phi and its first ``nderiv`` x-derivatives (exact chain rule)."""
        _check(eps, alpha)
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        outs = [np.empty(flat.size) for _ in range(nderiv + 1)]
        for s in range(0, flat.size, CHUNK):
            part = self._eval_chunk(eps, alpha, flat[s : s + CHUNK], nderiv)
            for o, p in zip(outs, part):
                o[s : s + CHUNK] = p
        return tuple(o.reshape(x.shape) for o in outs)


def _check(eps, alpha):
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if not alpha > -1.0:
        raise ValueError("alpha must exceed -1")


def build_phase_profiles(cell: CellSolution) -> PhaseExpansion:
    return PhaseExpansion(cell)


def eval_phase(pe: PhaseExpansion, eps: float, alpha: float, x):
    return pe.evaluate(eps, alpha, x, 2)


def q_fast(cell: CellSolution, eps: float, alpha: float, x):
    x = np.asarray(x, dtype=float)
    return cell.potential.eval_q(eps**alpha * x, x / eps)


def reduced_potential(pe: PhaseExpansion, eps: float, alpha: float, x):
    """V_red = e^{4 phi} (q - phi'' - phi'^2)."""
    phi, d1, d2 = pe.evaluate(eps, alpha, x, 2)
    return np.exp(4 * phi) * (q_fast(pe.cell, eps, alpha, x) - d2 - d1 * d1)


def phase_residual(pe: PhaseExpansion, eps: float, alpha: float, x):
    """q - phi'' - phi'^2 - eps^2 V0 - eps^(3+alpha) V1 at the points x."""
    phi, d1, d2 = pe.evaluate(eps, alpha, x, 2)
    X = eps**alpha * np.asarray(x, float)
    veff = eps**2 * pe.cell.V0(X) + eps ** (3 + alpha) * pe.cell.V1(X)
    return q_fast(pe.cell, eps, alpha, x) - d2 - d1 * d1 - veff


def effective_mismatch(pe: PhaseExpansion, eps: float, alpha: float, x, cv: "ChangeOfVariable | None" = None):
    """V_red(x) - eps^2 V0(eps^a xt) - eps^(3+a) V1(eps^a xt) with xt the new variable."""
    cv = cv or ChangeOfVariable(pe, eps, alpha)
    xt = cv.forward(x)
    Xt = eps**alpha * xt
    veff = eps**2 * pe.cell.V0(Xt) + eps ** (3 + alpha) * pe.cell.V1(Xt)
    return reduced_potential(pe, eps, alpha, x) - veff


class ChangeOfVariable:
    """x -> xt = int_0^x exp(-2 phi), with its inverse theta."""

    def __init__(self, pe: PhaseExpansion, eps: float, alpha: float, panel: float | None = None):
        _check(eps, alpha)
        self.pe = pe
        self.eps = eps
        self.alpha = alpha
        self.panel = panel if panel is not None else eps / 8.0
        self._nodes, self._weights = np.polynomial.legendre.leggauss(GL_NODES)

    def density(self, x):
        (phi,) = self.pe.evaluate(self.eps, self.alpha, x, 0)
        return np.exp(-2.0 * phi)

    def _segment(self, a, b):
        """Gauss-Legendre integral of the density over [a_i, b_i] (elementwise)."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = mid[:, None] + half[:, None] * self._nodes[None, :]
        vals = self.density(pts)
        return half * (vals @ self._weights)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if flat.size == 0:
            return x.copy()
        w = self.panel
        jmin = int(np.floor(min(flat.min(), 0.0) / w))
        jmax = int(np.ceil(max(flat.max(), 0.0) / w))
        edges = np.arange(jmin, jmax + 1) * w
        pieces = self._segment(edges[:-1], edges[1:])
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        cum -= cum[-jmin]  # anchor the value at x = 0
        j = np.clip(np.floor(flat / w).astype(np.int64) - jmin, 0, edges.size - 2)
        base = cum[j]
        rest = self._segment(edges[j], flat)
        return (base + rest).reshape(x.shape)

    def forward_grid(self, x):
        """Same map on a sorted uniform grid containing 0, using the grid cells as panels."""
        x = np.asarray(x, dtype=float)
        h = x[1] - x[0]
        sub = max(1, int(np.ceil(h / self.panel)))
        edges = np.linspace(x[0], x[-1], sub * (x.size - 1) + 1)
        pieces = self._segment(edges[:-1], edges[1:])
        cum = np.concatenate([[0.0], np.cumsum(pieces)])[::sub]
        i0 = int(np.argmin(np.abs(x)))
        if abs(x[i0]) > 1e-12 * max(1.0, abs(h)):
            corr = self._segment(np.array([0.0]), np.array([x[i0]]))[0]
            return cum - cum[i0] + corr
        return cum - cum[i0]

    def inverse(self, xt, tol: float = 1e-12, maxiter: int = 60):
        """theta(xt): Newton from xt itself, safeguarded by bracketing."""
        xt = np.asarray(xt, dtype=float)
        flat = xt.ravel()
        x = flat.copy()
        lo = np.full_like(x, -np.inf)
        hi = np.full_like(x, np.inf)
        for _ in range(maxiter):
            fx = self.forward(x) - flat
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx > 0, x, hi)
            step = fx / self.density(x)
            xn = x - step
            bad = (xn <= lo) | (xn >= hi)
            with np.errstate(invalid="ignore"):
                mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), xn)
            xn = np.where(bad, mid, xn)
            done = np.abs(xn - x) <= tol * np.maximum(1.0, np.abs(x))
            x = xn
            if np.all(done):
                return x.reshape(xt.shape)
        raise RuntimeError("inverse change of variable did not converge")


def transform(pe: PhaseExpansion, eps: float, alpha: float, xs, fs, x_out=None, cv=None):
    """(T f)(x) = e^{phi(x)} f(xt(x)) with f given by samples (xs, fs)."""
    cv = cv or ChangeOfVariable(pe, eps, alpha)
    x_out = xs if x_out is None else np.asarray(x_out, float)
    xt = _forward_any(cv, x_out)
    (phi,) = pe.evaluate(eps, alpha, x_out, 0)
    return np.exp(phi) * _interp(xs, fs, xt)


def inverse_transform(pe: PhaseExpansion, eps: float, alpha: float, xs, gs, s_out=None, cv=None):
    """(T^-1 g)(s) = e^{-phi(theta(s))} g(theta(s))."""
    cv = cv or ChangeOfVariable(pe, eps, alpha)
    s_out = xs if s_out is None else np.asarray(s_out, float)
    th = cv.inverse(s_out)
    (phi,) = pe.evaluate(eps, alpha, th, 0)
    return np.exp(-phi) * _interp(xs, gs, th)


def _forward_any(cv, x):
    x = np.asarray(x, float)
    if x.ndim == 1 and x.size > 2:
        d = np.diff(x)
        if np.all(d > 0) and np.allclose(d, d[0], rtol=1e-9, atol=0) and x[0] <= 0 <= x[-1]:
            return cv.forward_grid(x)
    return cv.forward(x)


def _interp(xs, fs, pts):
    xs = np.asarray(xs, float)
    fs = np.asarray(fs)
    if pts.min() < xs[0] - 1e-12 or pts.max() > xs[-1] + 1e-12:
        warnings.warn("evaluation leaves the sampled domain; values set to zero", RuntimeWarning, stacklevel=3)
    spline = CubicSpline(xs, fs, extrapolate=False)
    out = spline(pts)
    return np.nan_to_num(out, nan=0.0)
