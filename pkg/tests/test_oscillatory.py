import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillospec import AliasingError, full_grid_oracle, solve_cell, solve_oscillatory
from oscillospec.oscillatory import (
    assemble,
    fourier_hamiltonian,
    grid_points,
    min_grid,
    mode_set,
    rayleigh_quotient,
    sample_fast,
    solve_lowest,
)
from oscillospec.pipeline import auto_params
from oscillospec.potential import zero_potential


def test_mode_set_example():
    ms = mode_set(10.0, 0.5, 2)
    want = np.concatenate([np.arange(c - 2, c + 3) for c in (-80, -40, 0, 40, 80)])
    assert np.array_equal(ms.indices, want)
    assert ms.size == 25


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 100.0), st.floats(0.05, 5.0), st.integers(1, 60))
def test_mode_set_invariants(L, eps, n):
    ms = mode_set(L, eps, n)
    k = ms.indices
    assert np.all(np.diff(k) > 0)  # sorted, no duplicates
    assert ms.size <= 5 * (2 * n + 1)
    assert set(range(-n, n + 1)) <= set(k.tolist())
    j = np.arange(-2, 3)
    dist = np.min(np.abs(k[:, None] * math.pi / L - 2 * math.pi * j[None, :] / eps), axis=1)
    assert np.all(dist <= n * math.pi / L + 1e-9)
    if abs(2 * L / eps - round(2 * L / eps)) < 1e-12:
        assert np.array_equal(k, -k[::-1])


def test_mode_set_overlap():
    ms = mode_set(1.0, 1.0, 5)
    assert ms.size < 5 * 11
    assert ms.size == np.unique(ms.indices).size


def test_zero_potential_matrix_is_kinetic():
    ms = mode_set(10.0, 0.5, 3)
    H, _ = assemble(zero_potential(), 0.5, 1.0, 10.0, min_grid(ms.kmax), ms)
    assert np.max(np.abs(H - np.diag((ms.indices * math.pi / 10.0) ** 2))) == 0


def test_hermiticity_before_symmetrization(pot):
    ms = mode_set(40.0, 0.2, 64)
    _, dev = assemble(pot, 0.2, 2.0, 40.0, min_grid(ms.kmax), ms)
    assert dev < 1e-12


def test_linearity_in_amplitude(pot):
    ms = mode_set(20.0, 0.25, 8)
    N = min_grid(ms.kmax)
    H1, _ = assemble(pot, 0.25, 1.0, 20.0, N, ms)
    H3, _ = assemble(pot.scaled(3.0), 0.25, 1.0, 20.0, N, ms)
    off = ~np.eye(ms.size, dtype=bool)
    assert np.max(np.abs(H3[off] - 3 * H1[off])) < 1e-14


def test_aliasing_rejected(pot):
    with pytest.raises(AliasingError):
        solve_oscillatory(pot, 0.25, 1.0, 40.0, 1024, 64, 2)
    with pytest.raises(AliasingError):
        solve_oscillatory(pot, 0.25, 1.0, 40.0, 3000, 64, 2)


def test_free_particle():
    r = solve_oscillatory(zero_potential(), 0.5, 1.0, 10.0, None, 4, 5)
    assert r.eigenvalues[0] == pytest.approx(0.0, abs=1e-14)
    assert np.argmax(np.abs(r.eigenvectors[:, 0])) == np.nonzero(r.modes == 0)[0][0]
    f = full_grid_oracle(zero_potential(), 0.5, 1.0, 10.0, 3, 7)
    want = sorted([(k * math.pi / 10) ** 2 for k in range(-3, 4)])
    assert np.allclose(f.eigenvalues, want, atol=1e-14)


def test_diagonal_matrix():
    res = solve_lowest(np.diag([3.0, 1.0, 2.0]), 3, np.array([-1, 0, 1]), 1.0)
    assert np.allclose(res.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(res.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_restricted_matches_oracle_semiclassical(pot):
    r = solve_oscillatory(pot, 0.2, 2.0, 40.0, None, 64, 6)
    f = full_grid_oracle(pot, 0.2, 2.0, 40.0, 1200, 6)
    assert np.max(np.abs(r.eigenvalues - f.eigenvalues)) < 1e-6
    assert r.eigenvalues[0] < 0
    d = (math.pi / 40) ** 2
    assert r.negative_count(d) == f.negative_count(d) >= 1


def test_parity_split_matches_dense(pot):
    a = solve_oscillatory(pot, 0.25, 1.0, 30.0, None, 32, 4, parity="auto")
    b = solve_oscillatory(pot, 0.25, 1.0, 30.0, None, 32, 4, parity="off")
    assert a.meta["parity_split"] and not b.meta["parity_split"]
    # roundoff relative to the largest kinetic entry (~1e4)
    assert np.max(np.abs(a.eigenvalues - b.eigenvalues)) < 1e-11


def test_result_contract(pot):
    r = solve_oscillatory(pot, 0.25, 2.0, 60.0, None, 48, 5)
    assert np.all(np.diff(r.eigenvalues) >= 0)
    V = r.eigenvectors
    assert np.max(np.abs(V.conj().T @ V - np.eye(r.count))) < 1e-10
    # Rayleigh quotient of each eigenvector on the full-resolution grid
    x = grid_points(r.L, r.meta["N_grid"])
    psi = r.on_grid(x.size)
    for i in range(r.count):
        rq = rayleigh_quotient(pot, 0.25, 2.0, x, psi[i])
        assert rq == pytest.approx(r.eigenvalues[i], rel=1e-10, abs=1e-12)
    # negative threshold
    assert r.negative_threshold() == max(1e-10, (math.pi / (4 * r.L)) ** 2)


def test_rayleigh_gaussian_and_minmax(pot):
    L = 30.0
    x = grid_points(L, 2048)
    f = np.exp(-x**2 / 2)
    # int f'^2 / int f^2 = 1/2 for exp(-x^2/2)
    assert rayleigh_quotient(zero_potential(), 0.5, 1.0, x, f) == pytest.approx(0.5, abs=1e-12)
    r = solve_oscillatory(pot, 0.5, 1.0, L, 1 << 12, 64, 1)
    xs = grid_points(L, 1 << 12)
    for w in (1.0, 3.0, 10.0):
        trial = np.exp(-(xs / w) ** 2)
        assert rayleigh_quotient(pot, 0.5, 1.0, xs, trial) >= r.eigenvalues[0] - 1e-10


@pytest.mark.parametrize("eps,alpha", [(0.25, 1.0), (0.25, 2.0), (0.5, 0.5)])
def test_domain_and_band_robustness(cell, pot, eps, alpha):
    p = auto_params(cell, eps, alpha, 2)
    base = solve_oscillatory(pot, eps, alpha, p.L, p.N_grid, p.n, 2)
    neg = base.eigenvalues < -base.negative_threshold()
    assert neg.any()
    wide = solve_oscillatory(pot, eps, alpha, 2 * p.L, None, 2 * p.n, 2)
    band = solve_oscillatory(pot, eps, alpha, p.L, None, 2 * p.n, 2)
    assert np.max(np.abs((wide.eigenvalues - base.eigenvalues)[neg])) < 1e-8
    assert np.max(np.abs((band.eigenvalues - base.eigenvalues)[neg])) < 1e-8


def test_eigenfunction_evaluation_consistent(pot):
    r = solve_oscillatory(pot, 0.25, 2.0, 40.0, None, 32, 2)
    npts = 4096
    x = r.grid(npts)
    g = r.on_grid(npts)
    idx = np.arange(0, npts, 97)
    assert np.max(np.abs(r.evaluate(x[idx], 1) - g[1, idx])) < 1e-12
    # odd state is real after the phase fix
    assert np.max(np.abs(g[1].imag)) < 1e-12
