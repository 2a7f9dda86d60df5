"""Closed-form regime predictions, model eigenfunctions and rate fits.

Eigenvalue indices are 1-based here (n = 1 is the ground state).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cell import CellSolution
from .effective import solve_rescaled
from .oscillatory import SpectralResult

NOISE_FLOOR = 1e-9
MIN_FIT_POINTS = 4

REPORT_COLUMNS = ("epsilon", "alpha", "n", "lambda_osc", "lambda_eff", "lambda_formula", "err_eff",
                  "err_formula", "d_raw", "d_dressed")


def regime_of(alpha: float) -> str:
    if alpha > 1.0:
        return "semiclassical"
    if alpha < 1.0:
        return "weak-coupling"
    return "critical"


# -- semiclassical ----------------------------------------------------------

def well_data(cell: CellSolution, tol: float = 1e-12):
    """(V0(0), V0''(0)) after checking for a non-degenerate minimum at 0."""
    v0 = float(cell.V0_derivative(0.0, 0))
    d1 = float(cell.V0_derivative(0.0, 1))
    d2 = float(cell.V0_derivative(0.0, 2))
    if abs(d1) > tol or not d2 > tol:
        raise ValueError("V0 has no non-degenerate minimum at X = 0")
    probe = np.linspace(-12.0, 12.0, 2401)
    if np.min(cell.V0(probe)) < v0 - tol:
        raise ValueError("the minimum of V0 at X = 0 is not global on the probe range")
    return v0, d2


def semiclassical_prediction(cell: CellSolution, eps: float, alpha: float, n: int) -> float:
    """eps^2 V0(0) + eps^(1+a) (2n - 1) sqrt(V0''(0)/2)."""
    if not 1.0 < alpha < 3.0:
        raise ValueError("semiclassical prediction needs 1 < alpha < 3")
    if n < 1:
        raise ValueError("n is 1-based")
    v0, d2 = well_data(cell)
    return eps**2 * v0 + eps ** (1.0 + alpha) * (2 * n - 1) * math.sqrt(0.5 * d2)


@dataclass(frozen=True)
class HermiteModel:
    """n-th unit-norm eigenfunction of -H'' + omega^2 x^2 H = (2n - 1) omega H."""

    omega: float
    n: int = 1

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.n < 1:
            raise ValueError("n is 1-based")

    @classmethod
    def from_cell(cls, cell: CellSolution, n: int = 1) -> "HermiteModel":
        _, d2 = well_data(cell)
        return cls(math.sqrt(0.5 * d2), n)

    @property
    def eigenvalue(self) -> float:
        return (2 * self.n - 1) * self.omega

    def __call__(self, x):
        return hermite_eval(self, x)


def hermite_eval(hm: HermiteModel, x):
    # normalized three-term recurrence; never forms H_k(x) itself
    s = math.sqrt(hm.omega)
    t = s * np.asarray(x, float)
    h_prev = np.zeros_like(t)
    h = (hm.omega / math.pi) ** 0.25 * np.exp(-0.5 * t * t)
    for k in range(hm.n - 1):
        h_prev, h = h, math.sqrt(2.0 / (k + 1)) * t * h - math.sqrt(k / (k + 1)) * h_prev
    return h


def hermite_limit(cell: CellSolution, eps: float, alpha: float, n: int, x):
    """eps^((1+a)/4) H_n(eps^((1+a)/2) x)."""
    hm = HermiteModel.from_cell(cell, n)
    return eps ** ((1.0 + alpha) / 4.0) * hermite_eval(hm, eps ** ((1.0 + alpha) / 2.0) * np.asarray(x, float))


# -- weak coupling ----------------------------------------------------------

def _weak_checks(cell, alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("weak-coupling prediction needs 0 < alpha < 1")
    m = cell.integral_V0
    if not m < 0:
        raise ValueError("weak coupling needs int V0 < 0")
    return m


def weak_coupling_prediction(cell: CellSolution, eps: float, alpha: float) -> float:
    m = _weak_checks(cell, alpha)
    return -0.25 * eps ** (4.0 - 2.0 * alpha) * m * m


def weak_coupling_profile(cell: CellSolution, eps: float, alpha: float, x):
    _weak_checks(cell, alpha)
    theta = 0.5 * eps ** (2.0 - alpha) * cell.integral_absV0
    rate = 0.5 * eps ** (2.0 - alpha) * cell.integral_V0
    return math.sqrt(theta) * np.exp(np.abs(np.asarray(x, float)) * rate)


# -- critical ---------------------------------------------------------------

@dataclass
class CriticalReference:
    result: SpectralResult

    @property
    def negative(self) -> np.ndarray:
        ev = self.result.eigenvalues
        return ev[ev < -self.result.negative_threshold()]

    def prediction(self, eps: float, n: int) -> float:
        neg = self.negative
        if not 1 <= n <= neg.size:
            raise ValueError(f"D^2 + V0 has {neg.size} negative eigenvalue(s); n={n} unavailable")
        return eps**2 * float(neg[n - 1])

    def profile(self, eps: float, n: int, x):
        """eps^(1/2) phi_n(eps x), real and sign-fixed."""
        x = np.asarray(x, float)
        f = self.result.evaluate(eps * x.ravel(), n - 1)
        return math.sqrt(eps) * _realify(f).reshape(x.shape)


def critical_reference(cell: CellSolution, count: int = 4, L: float | None = None, N: int | None = None):
    return CriticalReference(solve_rescaled(cell, 1.0, count, L, N))


# -- rate fitting -----------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    max_residual: float
    stderr: float
    used: tuple
    dropped: tuple
    below_floor: bool

    @property
    def radius(self) -> float:
        """95% confidence radius for the slope (t distribution)."""
        dof = len(self.used) - 2
        if dof < 1 or not math.isfinite(self.stderr):
            return math.inf
        from scipy import stats

        return float(stats.t.ppf(0.975, dof) * self.stderr)


class FitError(ValueError):
    pass


def rate_fit(points, noise_floor: float = NOISE_FLOOR, min_points: int = MIN_FIT_POINTS) -> RateFit:
    """Least squares of log err against log eps; points under the floor are dropped."""
    pts = [(float(e), float(r)) for e, r in points]
    for e, r in pts:
        if not (e > 0 and math.isfinite(e)):
            raise FitError(f"bad epsilon {e}")
        if not (r > 0 and math.isfinite(r)):
            raise FitError(f"errors must be positive and finite (got {r} at eps={e})")
    used = tuple(p for p in pts if p[1] >= noise_floor)
    dropped = tuple(p for p in pts if p[1] < noise_floor)
    if len(used) < min_points:
        raise FitError(f"only {len(used)} point(s) above the noise floor {noise_floor:g}; need {min_points}")
    le = np.log([p[0] for p in used])
    lr = np.log([p[1] for p in used])
    from scipy import stats

    res = stats.linregress(le, lr)
    resid = lr - (res.slope * le + res.intercept)
    return RateFit(float(res.slope), float(res.intercept), float(np.max(np.abs(resid))), float(res.stderr),
                   used, dropped, bool(dropped))


# -- eigenfunction comparisons ----------------------------------------------

def _realify(f):
    f = np.asarray(f)
    if not np.iscomplexobj(f):
        return f
    k = int(np.argmax(np.abs(f)))
    if abs(f[k]) == 0:
        return f.real
    f = f * (abs(f[k]) / f[k])
    return f.real


def l2_norm(x, f) -> float:
    h = float(x[1] - x[0])
    return math.sqrt(h * float(np.sum(np.abs(f) ** 2)))


def align(f, ref, x=None):
    """Rotate f by a unit scalar so that <ref, f> is real and positive."""
    ip = np.vdot(ref, f)
    if abs(ip) == 0:
        return f
    return f * (np.conj(ip) / abs(ip))


def l2_distance(x, f, g, normalize: bool = True) -> float:
    """|| f - g || on a uniform periodic grid after phase alignment (and normalization)."""
    f = np.asarray(f)
    g = np.asarray(g)
    if normalize:
        f = f / l2_norm(x, f)
        g = g / l2_norm(x, g)
    f = align(f, g)
    return l2_norm(x, f - g)


@dataclass(frozen=True)
class Superposition:
    d_raw: float
    d_dressed: float
    d_simple: float


class DressingMap:
    """Grid data shared by every dressed eigenfunction at one (eps, alpha).

    Holds xt(x), e^{phi(x)} and e^{eps^2 Q(eps^a x, x/eps)} on the grid x.
    """

    def __init__(self, pe, eps: float, alpha: float, x, cv=None):
        from .normalform import ChangeOfVariable, _forward_any

        self.x = np.asarray(x, float)
        self.eps, self.alpha = eps, alpha
        cv = cv or ChangeOfVariable(pe, eps, alpha)
        self.xt = _forward_any(cv, self.x)
        (phi,) = pe.evaluate(eps, alpha, self.x, 0)
        self.ephi = np.exp(phi)
        self.esimple = np.exp(eps * eps * pe.cell.Q(eps**alpha * self.x, self.x / eps))

    def dressed(self, f):
        """T_phi f = e^phi f(xt) for f sampled on the periodic grid (periodic cubic spline)."""
        from scipy.interpolate import CubicSpline

        f = np.asarray(f)
        h = self.x[1] - self.x[0]
        L = -self.x[0]
        if abs(self.x[-1] + h - L) > 1e-9 * max(1.0, L):
            raise ValueError("dressing expects the periodic grid x_j = -L + j h")
        xs = np.append(self.x, L)
        spline = CubicSpline(xs, np.append(f, f[0]), bc_type="periodic")
        xt = np.mod(self.xt + L, 2.0 * L) - L
        return self.ephi * spline(xt)

    def simple(self, f):
        return self.esimple * np.asarray(f)


def superposition_check(x, psi, phi_eff, pe=None, eps: float | None = None, alpha: float | None = None,
                        dressing: DressingMap | None = None) -> Superposition:
    """Distances of psi to phi_eff, to T_phi(phi_eff) and to e^{eps^2 Q} phi_eff.

    All three comparison functions are normalized and phase aligned first.
    """
    x = np.asarray(x, float)
    phi_eff = _realify(phi_eff)
    dm = dressing or DressingMap(pe, eps, alpha, x)
    return Superposition(l2_distance(x, psi, phi_eff), l2_distance(x, psi, dm.dressed(phi_eff)),
                         l2_distance(x, psi, dm.simple(phi_eff)))


# -- report -----------------------------------------------------------------

@dataclass
class RegimeReport:
    regime: str
    records: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def sort(self):
        self.records.sort(key=lambda r: (-r["epsilon"], r["alpha"], r["n"]))
        return self

    def fit(self, key: str, n: int | None = None, noise_floor: float = NOISE_FLOOR):
        pts = [(r["epsilon"], r[key]) for r in self.records
               if (n is None or r["n"] == n) and r.get(key) is not None and math.isfinite(r[key])]
        f = rate_fit(pts, noise_floor)
        self.slopes[(key, n)] = (f.slope, f.radius)
        return f

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.records:
            w.writerow([_fmt(r.get(c)) for c in REPORT_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and not math.isfinite(v):
        return "nan"
    return repr(float(v))
