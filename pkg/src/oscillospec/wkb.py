"""WKB construction for alpha = 2 around the non-degenerate minimum X = 0 of V0.

With h = eps, the conjugated operator e^{Phi/h} ((h^3 D_X + D_y)^2 + h^2 q) e^{-Phi/h}
expands as sum_k h^k L_k with, in d-form,

    L0 = -d_y^2,  L1 = 0,  L2 = 2 Phi' d_y + q,  L3 = -2 d_X d_y,
    L4 = -Phi'^2,  L5 = Phi'' + 2 Phi' d_X,  L6 = -d_X^2.

Order k reads D_y^2 Psi_k = sum_i (lambda_i - L_i) Psi_{k-i}.  Its y-mean fixes
lambda_k together with f_{k-5}, the mean of Psi_{k-5}, through

    (Phi'' + 2 Phi' d_X - lambda_5) f_{k-5} = G_k + lambda_k f_0.

Everything near X = 0 is carried as Taylor jets in X times finite sums of
y-harmonics.  Orders are processed with a lag: at order k only f_0..f_{k-6}
are known, the unknown means enter order k through the transport term alone
(the f_{k-4} contribution cancels by the eikonal equation).

The level index n here is the WKB one (n = 0 is the ground state); the
1-based index of the rest of the package is n + 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .cell import CellSolution

JET_ORDER = 12
DEFAULT_K = 5
MAX_K = 8
SERIES_TOL = 1e-17
SERIES_CAP = 1.0
PANEL = 0.05
GL_NODES = 10
MASS_TOL = 1e-10
TWO_PI = 2.0 * math.pi


class JetOrderError(ValueError):
    """The Taylor jets lost too many orders to reach the X^n coefficient."""


class MinimumError(ValueError):
    """V0 drops below V0(0): the well assumption is violated."""


# -- harmonic x Taylor jets -------------------------------------------------

@dataclass
class Jet:
    """sum_{m,j} c[m + M, j] X^j e^{2 pi i m y}, exact up to X^valid."""

    c: np.ndarray
    valid: int

    @property
    def M(self) -> int:
        return (self.c.shape[0] - 1) // 2

    @property
    def J(self) -> int:
        return self.c.shape[1] - 1

    @classmethod
    def zeros(cls, M, J):
        return cls(np.zeros((2 * M + 1, J + 1), complex), J)

    @classmethod
    def scalar(cls, taylor, M, valid=None):
        taylor = np.asarray(taylor, complex)
        out = cls.zeros(M, taylor.size - 1)
        out.c[M] = taylor
        out.valid = taylor.size - 1 if valid is None else valid
        return out

    def copy(self):
        return Jet(self.c.copy(), self.valid)

    def __add__(self, o):
        return Jet(self.c + o.c, min(self.valid, o.valid))

    def __sub__(self, o):
        return Jet(self.c - o.c, min(self.valid, o.valid))

    def __neg__(self):
        return Jet(-self.c, self.valid)

    def __rmul__(self, s):
        return Jet(s * self.c, self.valid)

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return Jet(o * self.c, self.valid)
        M, J = self.M, self.J
        out = np.zeros_like(self.c)
        rows = [m for m in range(2 * M + 1) if np.any(self.c[m])]
        cols = [m for m in range(2 * M + 1) if np.any(o.c[m])]
        for a in rows:
            for b in cols:
                m = a + b - M
                if not 0 <= m <= 2 * M:
                    raise JetOrderError("harmonic range of the jets is too small")
                out[m] += np.convolve(self.c[a], o.c[b])[: J + 1]
        return Jet(out, min(self.valid, o.valid))

    def dy(self):
        m = np.arange(-self.M, self.M + 1)
        return Jet(self.c * (1j * TWO_PI * m)[:, None], self.valid)

    def dX(self):
        j = np.arange(1, self.J + 1)
        out = np.zeros_like(self.c)
        out[:, :-1] = self.c[:, 1:] * j
        return Jet(out, self.valid - 1)

    def mean(self) -> np.ndarray:
        return self.c[self.M].copy()

    def zero_mean(self):
        out = self.c.copy()
        out[self.M] = 0.0
        return Jet(out, self.valid)

    def inv_Dyy(self):
        """Mean-zero solution of D_y^2 u = self (the mean of self is ignored)."""
        m = np.arange(-self.M, self.M + 1).astype(float)
        den = (TWO_PI * m) ** 2
        den[self.M] = np.inf
        return Jet(self.c / den[:, None], self.valid)


def _taylor_sqrt(g):
    s = np.zeros_like(g)
    s[0] = math.sqrt(g[0])
    for j in range(1, g.size):
        s[j] = (g[j] - np.dot(s[1:j], s[j - 1 : 0 : -1])) / (2.0 * s[0])
    return s


def _taylor_div(a, b):
    out = np.zeros(a.size)
    for j in range(a.size):
        out[j] = (a[j] - np.dot(out[:j], b[j:0:-1])) / b[0]
    return out


@dataclass(frozen=True)
class WellJets:
    """Taylor data at X = 0: q and Q jets, S = Phi'/X, Phi', Phi''."""

    q: Jet
    Q: Jet
    V0: np.ndarray
    S: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    J: int


def well_jets(cell: CellSolution, J: int = JET_ORDER, M: int | None = None) -> WellJets:
    pot = cell.potential
    Mq = max(pot.max_harmonic, 1)
    M = M or Mq * (MAX_K // 2 + 3)
    Jx = J + 2
    qc = np.zeros((2 * M + 1, Jx + 1), complex)
    fact = np.array([math.factorial(j) for j in range(Jx + 1)], float)
    for m in pot.harmonics:
        qc[m + M] = [complex(pot.coefficient_derivative(m, j, 0.0)) for j in range(Jx + 1)] / fact
    q = Jet(qc, Jx)
    Q = (-q).inv_Dyy()
    V0 = (q * Q).mean()
    if np.max(np.abs(V0.imag)) > 1e-12 * max(1.0, np.max(np.abs(V0))):
        raise ValueError("V0 jet is not real")
    V0 = V0.real
    if abs(V0[1]) > 1e-12 or not V0[2] > 1e-12:
        raise MinimumError("V0 has no non-degenerate minimum at X = 0")
    S = _taylor_sqrt(V0[2:])  # (V0 - V0(0)) / X^2 = S^2
    phi1 = np.concatenate([[0.0], S])[: J + 2]
    phi2 = (phi1[1:] * np.arange(1, phi1.size))
    q = Jet(q.c[:, : J + 1].copy(), J)
    Q = Jet(Q.c[:, : J + 1].copy(), J)
    return WellJets(q, Q, V0, S[: J + 1], phi1[: J + 1], phi2[: J + 1], J)


# -- eigenvalue jets -----------------------------------------------------------

def _apply(i, psi, wj, P1, P2):
    if i == 2:
        return 2.0 * (P1 * psi.dy()) + wj.q * psi
    if i == 3:
        return -2.0 * psi.dy().dX()
    if i == 4:
        return -(P1 * P1 * psi)
    if i == 5:
        return P2 * psi + 2.0 * (P1 * psi.dX())
    if i == 6:
        return -psi.dX().dX()
    raise ValueError(i)


def _rhs(k, Psi, lam, wj, P1, P2):
    out = Jet.zeros(wj.q.M, wj.J)
    for i in range(2, k + 1):
        src = Psi[k - i]
        if lam[i]:
            out = out + lam[i] * src
        if i <= 6:
            out = out - _apply(i, src, wj, P1, P2)
    return out


def transport_solve(wj: WellJets, lam5: float, n: int, G, d=None, fixed: float = 0.0, valid: int | None = None):
    """Series solution of (Phi'' + 2 Phi' d_X - lam5) f = G + lam d.

    The X^n coefficient is singular: with ``d`` given it fixes lam (and f_n = 0),
    otherwise f_n = ``fixed``.  Returns (f, lam).
    """
    J = wj.J if valid is None else valid
    a = wj.phi2.copy()
    a[0] -= lam5
    b = 2.0 * wj.S
    G = np.zeros(J + 1) if G is None else np.asarray(G, float)
    f = np.zeros(J + 1)
    lam = 0.0
    for m in range(J + 1):
        acc = sum((a[k] + (m - k) * b[k]) * f[m - k] for k in range(1, m + 1))
        coef = a[0] + m * b[0]
        if m == n:
            if d is not None:
                lam = (acc - G[m]) / d[m]
                f[m] = 0.0
            else:
                f[m] = fixed
            continue
        rhs = G[m] - acc + (lam * d[m] if d is not None else 0.0)
        f[m] = rhs / coef
    return f, lam


@dataclass
class EigenvalueJets:
    n: int
    K: int
    lambdas: tuple
    f: dict = field(default_factory=dict)
    valid: dict = field(default_factory=dict)
    eikonal_defect: float = 0.0


def eigenvalue_jets(cell: CellSolution, n: int = 0, K: int = DEFAULT_K, J: int = JET_ORDER, C0: float = 1.0,
                    wj: WellJets | None = None) -> EigenvalueJets:
    """lambda_0..lambda_K from the solvability conditions, with Taylor jets of f_0..f_{K-5}."""
    if n < 0:
        raise ValueError("WKB level index n starts at 0")
    if not 0 <= K <= MAX_K:
        raise ValueError(f"K must be in 0..{MAX_K}")
    wj = wj or well_jets(cell, J)
    M = wj.q.M
    P1 = Jet.scalar(wj.phi1, M, J)
    P2 = Jet.scalar(wj.phi2, M, J)
    lam = [0.0] * (MAX_K + 1)

    # order 4: eikonal, probed with Psi_0 = 1
    one = Jet.scalar(np.eye(1, J + 1)[0], M, J)
    Psi = [one, Jet.zeros(M, J), (-wj.q).inv_Dyy()]
    Psi.append(Jet.zeros(M, J))
    G4 = _rhs(4, Psi, lam, wj, P1, P2).mean()
    lam[4] = float(-G4[0].real)
    eik = float(np.max(np.abs((G4 + lam[4] * np.eye(1, J + 1)[0])[: J - 1])))

    # order 5: transport, lambda_5 from the X^n coefficient
    lam[5] = float(wj.phi2[0] + n * 2.0 * wj.S[0])
    f = {}
    valid = {}
    if K >= 5:
        if n > J:
            raise JetOrderError(f"jet order {J} cannot reach X^{n}")
        f[0], _ = transport_solve(wj, lam[5], n, None, fixed=C0)
        valid[0] = J
    for k in range(6, K + 1):
        Psi = []
        for j in range(k):
            perp = _rhs(j, Psi, lam, wj, P1, P2).zero_mean().inv_Dyy()
            if j in f:
                perp = perp + Jet.scalar(f[j], M, valid[j])
            Psi.append(perp)
        rhs = _rhs(k, Psi, lam, wj, P1, P2)
        G = rhs.mean()
        if np.max(np.abs(G.imag)) > 1e-10 * max(1.0, np.max(np.abs(G))):
            raise ValueError("solvability data is not real")
        if rhs.valid < n:
            raise JetOrderError(f"order {k} keeps X^{rhs.valid} only; increase J beyond {J}")
        fk, lam[k] = transport_solve(wj, lam[5], n, G.real, d=f[0], valid=rhs.valid)
        f[k - 5] = np.concatenate([fk, np.zeros(J - rhs.valid)])
        valid[k - 5] = rhs.valid
    return EigenvalueJets(n, K, tuple(lam[: K + 1]), f, valid, eik)


# -- global profiles -------------------------------------------------------

def series_radius(c, tol: float = SERIES_TOL, cap: float = SERIES_CAP) -> float:
    """Radius where the last kept Taylor term drops to tol relative to the leading one."""
    c = np.abs(np.asarray(c, float))
    lead = c[0] if c[0] > 0 else np.max(c)
    if lead == 0:
        return cap
    r = cap
    for j in range(c.size - 2, c.size):
        if c[j] > 0:
            r = min(r, (tol * lead / c[j]) ** (1.0 / j))
    return float(r)


def _gl_cumulative(fun, X, panel=PANEL, nodes=GL_NODES):
    """int_0^X fun for every entry of X.

    fun is sampled at Gauss-Legendre nodes of panels anchored at 0; each panel
    carries the Legendre interpolant of fun, integrated exactly.
    """
    X = np.asarray(X, float)
    flat = X.ravel()
    out = np.zeros(flat.size)
    if flat.size == 0:
        return out.reshape(X.shape)
    leg = np.polynomial.legendre
    t, _ = leg.leggauss(nodes)
    vinv = np.linalg.inv(leg.legvander(t, nodes - 1))
    for side in (1.0, -1.0):
        sel = flat * side > 0
        if not np.any(sel):
            continue
        ext = float(np.max(side * flat[sel]))
        npan = max(1, int(math.ceil(ext / panel)))
        lo = side * panel * np.arange(npan)
        half = 0.5 * side * panel
        vals = fun(lo[:, None] + half * (t[None, :] + 1.0))
        coef = vals @ vinv.T  # (npan, nodes) Legendre coefficients in t
        anti = leg.legint(coef, axis=1, lbnd=-1.0) * half
        cum = np.concatenate([[0.0], np.cumsum(leg.legval(1.0, anti.T))])
        xs = flat[sel]
        j = np.minimum((side * xs / panel).astype(np.int64), npan - 1)
        tl = (xs - lo[j]) / half - 1.0
        out[sel] = cum[j] + leg.legval(tl, anti[j].T, tensor=False)
    return out.reshape(X.shape)


class AgmonProfile:
    """Phi, Phi', Phi'' and the leading profile f0 for level n."""

    def __init__(self, cell: CellSolution, n: int = 0, C0: float = 1.0, J: int = JET_ORDER):
        if n < 0:
            raise ValueError("WKB level index n starts at 0")
        self.cell, self.n, self.C0 = cell, n, C0
        self.wj = well_jets(cell, J)
        self.v00 = float(cell.V0(0.0))
        self.omega = float(self.wj.S[0])
        self.lam5 = (2 * n + 1) * self.omega
        S = self.wj.S
        # I = (Phi'' - lam5)/(2 Phi') + n/s = [(2n+1)(S - S0) + s S'] / (2 s S)
        k = np.arange(S.size)
        num = (2 * n + 1) * S + k * S
        num[0] -= (2 * n + 1) * S[0]
        self._I_series = _taylor_div(num[1:], 2.0 * S[: S.size - 1])
        # below this radius the truncated series beat the cancelling closed forms
        self.rho = min(series_radius(S), series_radius(self._I_series), series_radius(self.wj.phi2))

    def _gap(self, X, check=True):
        g = np.asarray(self.cell.V0(X), float) - self.v00
        if check and np.min(g) < -1e-12:
            raise MinimumError("V0(s) < V0(0) on the evaluation range")
        return np.maximum(g, 0.0)

    def dphi(self, X):
        X = np.asarray(X, float)
        out = np.sign(X) * np.sqrt(self._gap(X))
        near = np.abs(X) < self.rho
        if np.any(near):
            out[near] = X[near] * np.polynomial.polynomial.polyval(X[near], self.wj.S)
        return out

    def ddphi(self, X):
        X = np.asarray(X, float)
        near = np.abs(X) < self.rho
        Xs = np.where(near, 1.0, X)
        d1 = self.dphi(Xs)
        out = self.cell.V0_derivative(Xs, 1) / (2.0 * d1)
        if np.any(near):
            out[near] = np.polynomial.polynomial.polyval(X[near], self.wj.phi2)
        return out

    def integrand(self, X):
        """(Phi'' - lam5) / (2 Phi') + n / X, regular at 0."""
        X = np.asarray(X, float)
        near = np.abs(X) < self.rho
        Xs = np.where(near, 1.0, X)
        if np.any(~near) and np.min(np.abs(self.dphi(Xs[~near]))) <= 0.0:
            raise MinimumError("Phi' vanishes away from 0")
        out = (self.ddphi(Xs) - self.lam5) / (2.0 * self.dphi(Xs)) + self.n / Xs
        if np.any(near):
            out[near] = np.polynomial.polynomial.polyval(X[near], self._I_series)
        return out

    def phi(self, X):
        return np.abs(_gl_cumulative(self.dphi, X))

    def f0(self, X):
        X = np.asarray(X, float)
        return self.C0 * X**self.n * np.exp(-_gl_cumulative(self.integrand, X))

    def f0_and_derivative(self, X):
        X = np.asarray(X, float)
        e = self.C0 * np.exp(-_gl_cumulative(self.integrand, X))
        I = self.integrand(X)
        Xn = X**self.n
        Xn1 = self.n * X ** (self.n - 1) if self.n > 0 else np.zeros_like(X)
        return e * Xn, e * (Xn1 - Xn * I)


def agmon_phase(cell: CellSolution, X):
    """|int_0^X sqrt(V0(s) - V0(0)) ds| by adaptive quadrature (one side of 0 per call)."""
    v00 = float(cell.V0(0.0))

    def root(s):
        g = float(cell.V0(s)) - v00
        if g < -1e-12:
            raise MinimumError(f"V0({s:g}) < V0(0)")
        return math.sqrt(max(g, 0.0))

    def one(x):
        if x == 0.0:
            return 0.0
        # the integrand behaves like |s| at 0; start with a short panel there
        a = min(abs(x), 1e-2) * math.copysign(1.0, x)
        v1, _ = integrate.quad(root, 0.0, a, epsabs=1e-15, epsrel=1e-13, limit=200)
        v2 = 0.0
        if a != x:
            v2, _ = integrate.quad(root, a, x, epsabs=1e-15, epsrel=1e-13, limit=400)
        return abs(v1 + v2)

    X = np.asarray(X, float)
    return np.vectorize(one, otypes=[float])(X) if X.ndim else one(float(X))


def leading_profile_f0(cell: CellSolution, n: int, X, C0: float = 1.0):
    return AgmonProfile(cell, n, C0).f0(X)


def eikonal_residual(cell: CellSolution, X) -> np.ndarray:
    """lambda_4 + Phi'^2 - V0 on X."""
    ap = AgmonProfile(cell, 0)
    return ap.v00 + ap.dphi(X) ** 2 - cell.V0(X)


def transport_residual(cell: CellSolution, n: int, X, h: float = 1e-5):
    """lam5 f0 - Phi'' f0 - 2 Phi' f0' with f0' from central differences."""
    ap = AgmonProfile(cell, n)
    X = np.asarray(X, float)
    f = ap.f0(X)
    df = (ap.f0(X + h) - ap.f0(X - h)) / (2 * h)
    return ap.lam5 * f - ap.ddphi(X) * f - 2.0 * ap.dphi(X) * df


# -- expansion record ---------------------------------------------------------

@dataclass
class WkbExpansion:
    n: int
    lambdas: tuple
    profile: AgmonProfile = field(repr=False)
    jets: dict = field(default_factory=dict)
    C0: float = 1.0

    def phi(self, X):
        return self.profile.phi(X)

    def f0(self, X):
        return self.profile.f0(X)

    def eigenvalue(self, eps: float, order: int | None = None) -> float:
        """eps^-2 sum_k eps^k lambda_k (eigenvalue of the oscillatory operator)."""
        K = len(self.lambdas) - 1 if order is None else order
        return sum(eps ** (k - 2) * self.lambdas[k] for k in range(K + 1))


def wkb_expansion(cell: CellSolution, n: int = 0, K: int = DEFAULT_K, J: int = JET_ORDER, C0: float = 1.0):
    ej = eigenvalue_jets(cell, n, K, J, C0)
    return WkbExpansion(n, ej.lambdas, AgmonProfile(cell, n, C0, J), ej.f, C0)


def prop_index(n_wkb: int) -> int:
    return n_wkb + 1


def wkb_index(n_prop: int) -> int:
    if n_prop < 1:
        raise ValueError("1-based index expected")
    return n_prop - 1


# -- quasimode -----------------------------------------------------------------

def smooth_cutoff(X, R: float, inner: float = 0.5):
    """C^inf bump: 1 on |X| <= inner R, 0 on |X| >= R, exp(-1/t) blending."""
    if not (R > 0 and 0 < inner < 1):
        raise ValueError("need R > 0 and 0 < inner < 1")
    t = (np.abs(np.asarray(X, float)) - inner * R) / ((1.0 - inner) * R)
    t = np.clip(t, 0.0, 1.0)

    def g(s):
        with np.errstate(divide="ignore"):
            return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    a, b = g(1.0 - t), g(t)
    return a / (a + b)


def cutoff_radius(ap: AgmonProfile, eps: float, decay: float = 15.0, inner: float = 0.5, start: float = 0.5):
    """Smallest R on a geometric ladder with |f0| e^{-Phi/eps} at +-inner R below e^{-decay} of its peak."""
    R = start
    while R <= 1e4:
        X = np.linspace(-inner * R, inner * R, 2001)
        with np.errstate(divide="ignore"):
            la = np.log(np.abs(ap.f0(X))) - ap.phi(X) / eps
        if max(la[0], la[-1]) <= np.max(la) - decay:
            return R
        R *= 1.25
    raise ValueError("Agmon phase too flat for a cutoff")


@dataclass
class Quasimode:
    eps: float
    n: int
    R: float
    x: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    lam_app: float
    residual: float
    ratio: float
    truncated_mass: float
    include_Q: bool = True
    ablation_ratio: float | None = None


def _harmonics(cell, X):
    pot = cell.potential
    M = max(pot.max_harmonic, 1)
    q = np.zeros((2 * M + 1, X.size), complex)
    dq = np.zeros_like(q)
    for m in pot.harmonics:
        q[m + M] = pot.coefficient_derivative(m, 0, X)
        dq[m + M] = pot.coefficient_derivative(m, 1, X)
    return M, q, dq


def _synth(coef, M, y):
    out = np.zeros(y.size)
    for r in range(coef.shape[0]):
        if np.any(coef[r]):
            out += (coef[r] * np.exp(1j * TWO_PI * (r - M) * y)).real
    return out


def _inv_Dyy_rows(c, M):
    m = np.arange(-M, M + 1)[:, None].astype(float)
    den = (TWO_PI * m) ** 2
    den[M] = np.inf
    return c / den


def build_quasimode(cell: CellSolution, eps: float, n: int = 0, R: float | None = None, include_Q: bool = True,
                    correctors: bool = True, ablation: bool = False, inner: float = 0.5, decay: float = 15.0,
                    ppp: int | None = None, ap: AgmonProfile | None = None, lambdas=None) -> Quasimode:
    """u = chi e^{-Phi/eps} [f0 (1 + eps^2 Q) + eps^4 F4 + eps^5 F5] at X = eps^2 x, y = x/eps.

    F4 and F5 are the mean-zero correctors with f_1 = f_2 = f_3 = 0:

        D_y^2 F4 = -f0 (2 Phi' d_y Q + q Q - V0),  D_y^2 F5 = 2 (f0' d_y Q + f0 d_X d_y Q).

    The residual ||(L - lam_app) u|| / ||u|| uses lam_app = eps^2 lambda_4 + eps^3 lambda_5
    and FFT differentiation on a box carrying the whole cutoff.  With
    ``ablation`` the same data also give the ratio without the (1 + eps^2 Q) factor.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    ap = ap or AgmonProfile(cell, n)
    R = R or cutoff_radius(ap, eps, decay=decay, inner=inner)
    Lx = R / eps**2 * (1.0 + 1e-3)
    Mq = max(cell.potential.max_harmonic, 1)
    # (L - lam) u carries y-harmonics up to 3 Mq; keep them well inside Nyquist
    ppp = ppp or 16 * Mq
    npts = 1 << int(math.ceil(math.log2(2.0 * Lx * ppp / eps)))
    h = 2.0 * Lx / npts
    x = -Lx + h * np.arange(npts)
    X = eps**2 * x
    y = x / eps
    amp = smooth_cutoff(X, R, inner) * np.exp(-ap.phi(X) / eps)
    f0, df0 = ap.f0_and_derivative(X)

    M, q, dq = _harmonics(cell, X)
    m = np.arange(-M, M + 1)[:, None]
    Q = _inv_Dyy_rows(-q, M)
    yQ = 1j * TWO_PI * m * Q
    yXQ = 1j * TWO_PI * m * _inv_Dyy_rows(-dq, M)
    corr = np.zeros(npts)
    if correctors:
        M2 = 2 * M
        qQ = np.zeros((2 * M2 + 1, npts), complex)
        for i in range(2 * M + 1):
            if not np.any(q[i]):
                continue
            for j in range(2 * M + 1):
                if np.any(Q[j]):
                    qQ[i + j] += q[i] * Q[j]
        qQ[M2] = 0.0
        rhs4 = -qQ
        rhs4[M : 3 * M + 1] -= 2.0 * ap.dphi(X) * yQ
        F4 = _inv_Dyy_rows(rhs4 * f0, M2)
        F5 = _inv_Dyy_rows(2.0 * (df0 * yQ + f0 * yXQ), M)
        corr = eps**4 * _synth(F4, M2, y) + eps**5 * _synth(F5, M, y)
    dressing = eps**2 * f0 * _synth(Q, M, y)

    lam = lambdas or eigenvalue_jets(cell, n, 5).lambdas
    lam_app = eps**2 * lam[4] + eps**3 * lam[5]
    k2 = (np.fft.fftfreq(npts, h) * TWO_PI) ** 2
    qx = cell.potential.eval_q(X, y)
    core = np.abs(X) <= inner * R

    def measure(u):
        r = np.fft.ifft(k2 * np.fft.fft(u)).real + (qx - lam_app) * u
        nu = math.sqrt(h * float(np.dot(u, u)))
        res = math.sqrt(h * float(np.dot(r, r)))
        return res, res / nu, float(np.dot(u[~core], u[~core]) / np.dot(u, u))

    u = amp * (f0 + (dressing if include_Q else 0.0) + corr)
    res, ratio, trunc = measure(u)
    if trunc > MASS_TOL:
        warnings.warn(f"cutoff truncates a relative mass {trunc:.1e}", RuntimeWarning, stacklevel=2)
    abl = measure(amp * (f0 + corr))[1] if ablation and include_Q else None
    return Quasimode(eps, n, R, x, u, lam_app, res, ratio, trunc, include_Q, abl)
