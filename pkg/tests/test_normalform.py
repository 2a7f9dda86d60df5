import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillospec import ChangeOfVariable, PhaseExpansion, solve_cell
from oscillospec.asymptotics import rate_fit
from oscillospec.normalform import (
    effective_mismatch,
    inverse_transform,
    phase_residual,
    reduced_potential,
    transform,
)
from conftest import twisted, two_harmonic

EPS = [2.0**-k for k in range(2, 6)]


@pytest.fixture(scope="module")
def pe(cell):
    return PhaseExpansion(cell)


def _x(eps, alpha, cap=60.0, step=16):
    xm = min(4.0 / eps**alpha, cap)
    return np.arange(-xm, xm, eps / step)


def G(H, y, d=0):
    """Profile on the (X, y) grid: rows are X points."""
    ph = np.exp(2j * np.pi * np.outer(H.harmonics, y))
    return (H.data[d].T @ ph).real


def _quad_poisson(rhs, M=128):
    """Mean-zero solution of f'' = rhs on the circle, from M samples (FFT oracle)."""
    k = np.fft.fftfreq(M, 1.0 / M)
    c = np.fft.fft(rhs)
    den = -(2 * np.pi * k) ** 2
    den[0] = np.inf
    return np.fft.ifft(c / den).real


def test_P00_is_Q(cell, pe):
    X = np.linspace(-5, 5, 11)
    y = np.arange(16) / 16
    P00 = pe.profiles(X)["P00"]
    assert np.max(np.abs(G(P00, y) - cell.Q(X[:, None], y[None, :]))) < 1e-15


@pytest.mark.parametrize("make", [two_harmonic, twisted])
def test_profiles_zero_mean_and_sources_mean_zero(make):
    c = solve_cell(make())
    st_ = PhaseExpansion(c).profiles(np.linspace(-6, 6, 13))
    y = np.arange(128) / 128
    for name, P in st_.items():
        assert np.max(np.abs(G(P, y).mean(axis=-1))) < 1e-12, name
    # the order (1,0) and (2,0) sources are mean-zero on their own: V_{1,0} = V_{2,0} = 0 emerge
    Q = st_["P00"]
    assert np.max(np.abs((Q.dX().dy()).mean())) < 1e-15


def test_recursion_identities(cell):
    X = np.linspace(-4, 4, 9)
    st_ = PhaseExpansion(cell).profiles(X)
    Q, P10, P20, P30 = st_["P00"], st_["P10"], st_["P20"], st_["P30"]
    y = np.arange(64) / 64
    # d_y^2 P20 = 3 d_X^2 Q (D_y^2 P20 = 3 D_X^2 Q; the D^2 signs cancel)
    assert np.max(np.abs(G(P20.dy(2), y) - 3 * G(Q.dX(2), y))) < 1e-12
    # d_y^2 P30 = 2 d_X^2 P10, and it agrees with the general order-(k,0) step
    lhs = G(P30.dy(2), y)
    assert np.max(np.abs(lhs - 2 * G(P10.dX(2), y))) < 1e-12
    gen = -2 * G(P20.dX().dy(), y) - G(P10.dX(2), y)
    assert np.max(np.abs(lhs - gen)) < 1e-12


def test_P11_against_quadrature_poisson(cell):
    st_ = PhaseExpansion(cell).profiles(np.linspace(-5, 5, 21))
    Q, P01, P11 = st_["P00"], st_["P01"], st_["P11"]
    M = 128
    y = np.arange(M) / M
    rhs = -2 * G(P01.dX().dy(), y) + 2 * G(Q.dX(), y) * G(Q.dy(), y)
    rhs = rhs - rhs.mean(axis=-1, keepdims=True)  # remove V1
    ref = np.array([_quad_poisson(r, M) for r in rhs])
    assert np.max(np.abs(G(P11, y) - ref)) < 1e-10


def test_poisson_residuals_by_finite_differences(cell):
    st_ = PhaseExpansion(cell).profiles(np.linspace(-3, 3, 7))
    y = np.linspace(0, 1, 50, endpoint=False)
    h = 1e-4
    Q, P01 = st_["P00"], st_["P01"]
    fd = (G(P01, y + h) - 2 * G(P01, y) + G(P01, y - h)) / h**2
    src = -(G(Q.dy(), y) ** 2)
    src = src - src.mean(axis=-1, keepdims=True)
    assert np.max(np.abs(fd - src)) < 1e-6


def test_zero_potential_phase(zero_cell):
    pe0 = PhaseExpansion(zero_cell)
    x = np.linspace(-10, 10, 101)
    for arr in pe0.evaluate(0.25, 1.0, x, 2):
        assert np.all(arr == 0)
    assert np.all(reduced_potential(pe0, 0.25, 1.0, x) == 0)
    cv = ChangeOfVariable(pe0, 0.25, 1.0)
    assert np.max(np.abs(cv.forward(x) - x)) < 1e-12
    f = np.exp(-x**2)
    assert np.max(np.abs(transform(pe0, 0.25, 1.0, x, f) - f)) < 1e-14


def test_derivatives_match_finite_differences(pe):
    eps, a = 0.2, 1.0
    x = np.linspace(-3, 3, 31)
    h = 1e-5
    phi, d1, d2 = pe.evaluate(eps, a, x, 2)
    p_, _, _ = pe.evaluate(eps, a, x + h, 2)
    m_, _, _ = pe.evaluate(eps, a, x - h, 2)
    assert np.max(np.abs((p_ - m_) / (2 * h) - d1)) < 1e-8
    assert np.max(np.abs((p_ - 2 * phi + m_) / h**2 - d2)) < 1e-4


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_phase_orders(pe, cell, alpha):
    sup, corr = [], []
    for e in EPS:
        x = _x(e, alpha)
        (phi,) = pe.evaluate(e, alpha, x, 0)
        sup.append((e, np.max(np.abs(phi))))
        corr.append((e, np.max(np.abs(phi - e * e * cell.Q(e**alpha * x, x / e)))))
    assert rate_fit(sup).slope >= 1.9
    assert rate_fit(corr, noise_floor=1e-14).slope >= min(3 + alpha, 4) - 0.5


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_reduced_potential_orders(pe, alpha):
    target = min(4, 4 * (1 + alpha)) - 0.5
    res, mis, xt = [], [], []
    for e in EPS:
        x = _x(e, alpha)
        cv = ChangeOfVariable(pe, e, alpha)
        res.append((e, np.max(np.abs(phase_residual(pe, e, alpha, x)))))
        mis.append((e, np.max(np.abs(effective_mismatch(pe, e, alpha, x, cv)))))
        fwd = cv.forward_grid(x)
        m = np.abs(x) > 1e-9
        xt.append((e, np.max(np.abs(fwd - x)[m] / np.abs(x)[m])))
    for pts in (res, mis):
        f = rate_fit(pts, noise_floor=1e-14)
        assert f.slope >= target
    assert rate_fit(xt).slope >= 1.9


def test_change_of_variable_round_trip(pe):
    cv = ChangeOfVariable(pe, 0.2, 2.0)
    x = np.linspace(-30, 30, 101)
    xt = cv.forward(x)
    assert np.all(np.diff(xt) > 0)
    assert np.max(np.abs(cv.inverse(xt) - x)) < 1e-10
    # grid path and pointwise path agree
    g = np.linspace(-30, 30, 2401)
    assert np.max(np.abs(cv.forward_grid(g)[::24] - cv.forward(g[::24]))) < 1e-11


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.0, 2.5), st.floats(-20, 20))
def test_forward_map_monotone(eps, alpha, x0):
    from oscillospec import default_potential

    pe_ = _shared_pe()
    cv = ChangeOfVariable(pe_, eps, alpha)
    x = np.linspace(x0, x0 + 3.0, 61)
    assert np.all(np.diff(cv.forward(x)) > 0)


_PE = []


def _shared_pe():
    if not _PE:
        from oscillospec import default_potential

        _PE.append(PhaseExpansion(solve_cell(default_potential())))
    return _PE[0]


def test_transform_inverse_identity(pe):
    eps, a = 0.2, 1.0
    xs = np.arange(-40, 40, eps / 16)
    f = np.exp(-(xs / 6) ** 2)
    g = transform(pe, eps, a, xs, f, x_out=xs[np.abs(xs) < 39])
    xg = xs[np.abs(xs) < 39]
    s_out = xg[np.abs(xg) < 30]
    back = inverse_transform(pe, eps, a, xg, g, s_out=s_out)
    assert np.max(np.abs(back - np.exp(-(s_out / 6) ** 2))) < 1e-8


def test_transform_distance_order(pe):
    pts = []
    for e in EPS:
        xs = np.arange(-40, 40, e / 16)
        f = np.exp(-(xs / 6) ** 2)
        g = transform(pe, e, 1.0, xs, f)
        pts.append((e, np.sqrt(np.sum((g - f) ** 2) / np.sum(f**2))))
    assert rate_fit(pts).slope >= 1.9


def test_transform_warns_outside_domain(pe):
    xs = np.linspace(-1, 1, 101)
    with pytest.warns(RuntimeWarning):
        transform(pe, 0.5, 1.0, xs, np.ones_like(xs), x_out=np.array([2.0]))


def test_conjugation_identity(pe):
    """-(T f)'' + q T f = e^{-3 phi} [(-f'' + V_red... ) evaluated through xt]."""
    eps, a = 0.25, 1.0
    h = eps / 128
    x = np.arange(-12, 12 + h / 2, h)
    cv = ChangeOfVariable(pe, eps, a)
    xt = cv.forward_grid(x)
    phi, d1, d2 = pe.evaluate(eps, a, x, 2)
    s = 0.2
    f = np.exp(-s * xt**2)
    fpp = (4 * s * s * xt**2 - 2 * s) * f
    psi = np.exp(phi) * f
    # 4th-order central second derivative
    lap = (-psi[4:] + 16 * psi[3:-1] - 30 * psi[2:-2] + 16 * psi[1:-3] - psi[:-4]) / (12 * h * h)
    q = pe.cell.potential.eval_q(eps**a * x, x / eps)
    lhs = -lap + (q * psi)[2:-2]
    # V_red is a function of x; composing with theta means evaluating at the same x
    vred = reduced_potential(pe, eps, a, x)
    rhs = (np.exp(-3 * phi) * (-fpp + vred * f))[2:-2]
    assert np.max(np.abs(lhs - rhs)) < 1e-6
