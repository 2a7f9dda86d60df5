import numpy as np
import pytest

from oscillospec import solve_cell, solve_effective, solve_rescaled
from oscillospec.asymptotics import rate_fit
from oscillospec.effective import LineProblem, line_problem_for, solve_line, with_resolution
from conftest import twisted

# ground state of D^2 + V0 for V0 = -(2/pi^2) exp(-X^2/4).  Frozen after two
# Fourier resolutions (L=50, N=149 and L=100, N=600) agreed to 3e-12, and a
# Richardson-extrapolated finite-difference solve agreed to 5e-12.
LAMBDA1_V0 = -0.0643437982204


def test_harmonic_oscillator():
    res = solve_line(LineProblem(lambda x: x**2, 1.0, 12.0, 256), 3)
    assert np.max(np.abs(res.eigenvalues - [1, 3, 5])) < 1e-8


def test_zero_potential():
    res = solve_line(LineProblem(lambda x: np.zeros_like(x), 1.0, 20.0, 32), 2)
    assert res.eigenvalues[0] == pytest.approx(0.0, abs=1e-14)


def test_invalid_line_problem():
    with pytest.raises(ValueError):
        LineProblem(lambda x: x, 0.0, 10.0, 8)
    with pytest.raises(ValueError):
        solve_effective(None, 0.0, 1.0)


@pytest.mark.parametrize("L,N", [(50.0, 149), (100.0, 600)])
def test_critical_golden(cell, L, N):
    lam = solve_rescaled(cell, 1.0, 1, L=L, N=N).eigenvalues[0]
    assert lam == pytest.approx(LAMBDA1_V0, abs=1e-9)


def test_critical_golden_finite_difference_oracle(cell):
    from scipy.linalg import eigh_tridiagonal

    def fd(h, L=60.0):
        x = np.arange(-L, L + h / 2, h)[1:-1]
        d = 2 / h**2 + cell.V0(x)
        return eigh_tridiagonal(d, -np.ones(x.size - 1) / h**2, select="i", select_range=(0, 0))[0][0]

    a, b = fd(0.02), fd(0.01)
    assert (4 * b - a) / 3 == pytest.approx(LAMBDA1_V0, abs=1e-9)


@pytest.mark.parametrize("eps,alpha", [(0.25, 2.0), (0.2, 0.5), (0.25, 1.0)])
def test_rescaling_identity(cell, eps, alpha):
    r = solve_effective(cell, eps, alpha, False, 2)
    s = solve_rescaled(cell, eps ** (2 * (alpha - 1)), 2)
    bound = r.eigenvalues < -r.negative_threshold()
    assert bound.any()
    assert np.max(np.abs(r.eigenvalues - eps**2 * s.eigenvalues)[bound]) < 1e-9 * eps**2


def test_critical_exact_rescaling(cell):
    for eps in (0.25, 0.125):
        lam = solve_effective(cell, eps, 1.0, False, 1).eigenvalues[0]
        assert lam == pytest.approx(eps**2 * LAMBDA1_V0, rel=1e-10)


def test_single_harmonic_V1_toggle(cell):
    a = solve_effective(cell, 0.25, 1.0, True, 2)
    b = solve_effective(cell, 0.25, 1.0, False, 2, a.L, a.meta["N"])
    assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) < 1e-12


@pytest.mark.slow
def test_V1_toggle_order():
    c = solve_cell(twisted())
    pts = []
    for k in (2, 2.5, 3, 3.5):
        e = 2.0**-k
        a = solve_effective(c, e, 0.5, True, 1)
        b = solve_effective(c, e, 0.5, False, 1, a.L, a.meta["N"])
        pts.append((e, abs(a.eigenvalues[0] - b.eigenvalues[0])))
    assert rate_fit(pts, noise_floor=1e-14).slope >= 3.5 - 0.5


def test_negative_count_grows(cell):
    counts = [solve_effective(cell, e, 2.0, True, 8).negative_count() for e in (0.25, 0.2, 1 / 6, 0.125)]
    assert counts == sorted(counts)
    assert counts[-1] > counts[0]


@pytest.mark.parametrize("eps,alpha", [(0.25, 2.0), (0.2, 0.5)])
def test_resolution_doubling(cell, eps, alpha):
    lp = line_problem_for(cell, eps, alpha, True, 2)
    a = solve_line(lp, 2).eigenvalues
    b = solve_line(with_resolution(lp, 2), 2).eigenvalues
    assert np.max(np.abs(a - b)) < 1e-9
