"""Fourier eigensolvers on the periodic box (-L, L).

Basis functions are e_k(x) = exp(i k pi x / L) / sqrt(2L).  The potential
enters through its discrete Fourier coefficients on 2*N_grid equispaced
samples, so matrix entries are (k pi/L)^2 delta_kk' + g_hat(k - k').

The restricted scheme keeps only the five bands of width n around the
multiples 2 pi j / eps (j = -2..2) of the fast frequency.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .potential import TwoScalePotential

log = logging.getLogger(__name__)

DEFAULT_L = 40.0
DEFAULT_N_GRID = 2**14
DEFAULT_N = 128
MAX_DENSE_MODES = 8193
MAX_DENSE_BYTES = 2.5e9


class AliasingError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModeSet:
    L: float
    eps: float
    n: int
    indices: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def kmax(self) -> int:
        return int(np.max(np.abs(self.indices)))


def mode_set(L: float, eps: float, n: int, bands: int = 2) -> ModeSet:
    """Integers k with |k pi/L - 2 pi j/eps| <= n pi/L for some |j| <= bands."""
    if not (L > 0 and eps > 0 and n >= 1):
        raise ValueError("need L > 0, eps > 0 and n >= 1")
    tol = 1e-9
    parts = []
    for j in range(-bands, bands + 1):
        c = 2.0 * j * L / eps
        lo = math.ceil(c - n - tol)
        hi = math.floor(c + n + tol)
        parts.append(np.arange(lo, hi + 1))
    idx = np.unique(np.concatenate(parts))
    return ModeSet(float(L), float(eps), int(n), idx)


def full_mode_set(L: float, N: int) -> ModeSet:
    return ModeSet(float(L), math.inf, int(N), np.arange(-N, N + 1))


def min_grid(kmax: int, floor: int = DEFAULT_N_GRID) -> int:
    """Smallest power of two N_grid with N_grid >= 4 kmax (and >= floor)."""
    need = max(4 * kmax, floor, 4)
    return 1 << int(math.ceil(math.log2(need)))


def grid_points(L: float, N_grid: int):
    npts = 2 * N_grid
    return -L + np.arange(npts) * (2.0 * L / npts)


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, coefficient space
    modes: np.ndarray
    L: float
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    def negative_threshold(self) -> float:
        return max(1e-10, (math.pi / (4.0 * self.L)) ** 2)

    def negative_count(self, threshold: float | None = None) -> int:
        thr = self.negative_threshold() if threshold is None else threshold
        return int(np.sum(self.eigenvalues < -thr))

    def grid(self, npts: int):
        return -self.L + np.arange(npts) * (2.0 * self.L / npts)

    def on_grid(self, npts: int, which=None):
        """Eigenfunctions sampled at x_j = -L + 2 L j / npts (exact Fourier sums)."""
        if 2 * int(np.max(np.abs(self.modes))) >= npts:
            raise ValueError("grid too coarse for the mode set")
        cols = range(self.count) if which is None else np.atleast_1d(which)
        signs = np.where(self.modes % 2 == 0, 1.0, -1.0)
        pos = np.mod(self.modes, npts)
        out = np.empty((len(cols), npts), dtype=complex)
        buf = np.zeros(npts, dtype=complex)
        for r, c in enumerate(cols):
            buf[:] = 0.0
            buf[pos] = self.eigenvectors[:, c] * signs
            out[r] = np.fft.ifft(buf) * (npts / math.sqrt(2.0 * self.L))
        return out

    def evaluate(self, x, which: int = 0):
        """Direct Fourier sum at arbitrary points (for small mode sets)."""
        x = np.asarray(x, float)
        c = self.eigenvectors[:, which]
        ph = np.exp(1j * np.pi / self.L * np.outer(x.ravel(), self.modes))
        return (ph @ c).reshape(x.shape) / math.sqrt(2.0 * self.L)


def potential_dft(samples: np.ndarray):
    """g_hat(m) for m in (-npts/2, npts/2), returned as the raw FFT array."""
    npts = samples.size
    return np.fft.fft(samples) / npts


def fourier_hamiltonian(samples, L: float, modes: np.ndarray, kinetic: float = 1.0):
    """Dense matrix kinetic (k pi/L)^2 delta + g_hat(k - k') on the given modes.

    Returns (H, deviation) where deviation is the Hermiticity defect before
    symmetrization.
    """
    samples = np.asarray(samples)
    npts = samples.size
    if 4 * int(np.max(np.abs(modes))) > npts // 2:
        raise AliasingError("N_grid must satisfy N_grid >= 4 max|k| (anti-aliasing)")
    G = potential_dft(samples)
    diff = modes[:, None] - modes[None, :]
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    H = G[np.mod(diff, npts)] * sign
    dev = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    H = 0.5 * (H + H.conj().T)
    H[np.diag_indices_from(H)] += kinetic * (modes * math.pi / L) ** 2
    if _is_even(samples):
        # g_hat is real for even samples; drop FFT round-off in the imaginary part
        H = H.real.copy()
    return H, dev


def _is_even(samples) -> bool:
    if np.iscomplexobj(samples):
        return False
    scale = max(float(np.max(np.abs(samples))), 1e-300)
    return float(np.max(np.abs(samples[1:] - samples[:0:-1]), initial=0.0)) <= 1e-13 * scale


def sample_fast(pot: TwoScalePotential, eps: float, alpha: float, x):
    return pot.eval_q(eps**alpha * x, x / eps)


def _check_grid(N_grid, modes: ModeSet):
    if N_grid < 1 or N_grid & (N_grid - 1):
        raise AliasingError("N_grid must be a power of two")
    if N_grid < 4 * modes.kmax:
        raise AliasingError(f"N_grid={N_grid} < 4 max|k| = {4 * modes.kmax}")


def assemble(pot: TwoScalePotential, eps: float, alpha: float, L: float, N_grid: int, modes: ModeSet):
    """Dense restricted matrix; the solvers use the parity-split path when they can."""
    _check_grid(N_grid, modes)
    x = grid_points(L, N_grid)
    H, dev = fourier_hamiltonian(sample_fast(pot, eps, alpha, x), L, modes.indices)
    if dev > 1e-12:
        log.warning("Hermiticity defect %.3e before symmetrization", dev)
    else:
        log.debug("Hermiticity defect %.3e", dev)
    return H, dev


def _reference_candidates(modes):
    """Coefficient-space references: even k=0 mode, then the odd k=1 combination."""
    refs = []
    i0 = np.nonzero(modes == 0)[0]
    if i0.size:
        r = np.zeros(modes.size, complex)
        r[i0] = 1.0
        refs.append(r)
    ip, im = np.nonzero(modes == 1)[0], np.nonzero(modes == -1)[0]
    if ip.size and im.size:
        r = np.zeros(modes.size, complex)
        r[ip], r[im] = -0.5j, 0.5j  # coefficients of sin(pi x/L)
        refs.append(r)
    return refs


def fix_phases(vecs: np.ndarray, modes: np.ndarray, reference=None):
    """Rotate each column so that <reference, v> is real positive.

    Real vectors only admit a sign flip; the sign of the dominant part of the
    inner product is used then.
    """
    real = np.isrealobj(vecs)
    vecs = np.array(vecs)
    refs = [np.asarray(reference)] if reference is not None else _reference_candidates(modes)
    for c in range(vecs.shape[1]):
        v = vecs[:, c]
        ip = 0.0
        for r in refs:
            ip = np.vdot(r, v)
            if abs(ip) > 1e-8:
                break
        if abs(ip) <= 1e-8:
            ip = v[int(np.argmax(np.abs(v)))]
        if real:
            z = complex(ip)
            part = z.real if abs(z.real) >= abs(z.imag) else z.imag
            vecs[:, c] = v if part > 0 else -v
        else:
            vecs[:, c] = v * (np.conj(ip) / abs(ip))
    return vecs


def solve_lowest(H: np.ndarray, count: int, modes: np.ndarray, L: float, reference=None, meta=None) -> SpectralResult:
    w, v = _eigh_lowest(H, count)
    v = fix_phases(v, modes, reference)
    return SpectralResult(np.asarray(w), v, np.asarray(modes), float(L), dict(meta or {}))


def _eigh_lowest(H, count):
    count = min(int(count), H.shape[0])
    try:
        w, v = linalg.eigh(H, subset_by_index=[0, count - 1], driver="evr")
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise EigenSolverError("non-finite eigenvalues")
    return w, v


def hermiticity_defect(G, modes) -> float:
    """max |g_hat(m) - conj g_hat(-m)| over the differences m occurring in the matrix."""
    npts = G.size
    span = int(np.max(modes) - np.min(modes))
    m = np.arange(0, span + 1)
    return float(np.max(np.abs(G[m % npts] - np.conj(G[(-m) % npts]))))


def _symmetric(modes) -> bool:
    return modes.size > 0 and np.array_equal(modes, -modes[::-1])


def solve_fourier(samples, L: float, modes, count: int, kinetic: float = 1.0, reference=None, meta=None,
                  parity: str = "auto") -> SpectralResult:
    """Lowest eigenpairs of kinetic D^2 + g on the given Fourier modes.

    For even samples on a symmetric mode set the matrix splits into cosine
    and sine blocks, which are solved separately (about 4x cheaper).
    Odd eigenvectors are stored with the factor -i that makes the
    eigenfunction real.
    """
    samples = np.asarray(samples)
    modes = np.asarray(modes)
    npts = samples.size
    if 4 * int(np.max(np.abs(modes))) > npts // 2:
        raise AliasingError("N_grid must satisfy N_grid >= 4 max|k| (anti-aliasing)")
    G = potential_dft(samples)
    dev = hermiticity_defect(G, modes)
    meta = dict(meta or {})
    meta["hermiticity_defect"] = dev
    use_parity = parity == "on" or (parity == "auto" and _symmetric(modes) and _is_even(samples))
    if not use_parity:
        H, _ = fourier_hamiltonian(samples, L, modes, kinetic)
        meta["parity_split"] = False
        return solve_lowest(H, count, modes, L, reference, meta)
    if not (_symmetric(modes) and _is_even(samples)):
        raise ValueError("parity split needs even samples and a symmetric mode set")
    meta["parity_split"] = True
    pos = modes[modes > 0]
    sgn = lambda m: np.where(m % 2 == 0, 1.0, -1.0)
    g = lambda m: G[np.mod(m, npts)].real * sgn(m)
    A = g(pos[:, None] - pos[None, :])
    B = g(pos[:, None] + pos[None, :])
    kin = kinetic * (pos * math.pi / L) ** 2
    He = np.empty((pos.size + 1, pos.size + 1))
    He[0, 0] = g(np.array(0))
    He[0, 1:] = He[1:, 0] = math.sqrt(2.0) * g(pos)
    He[1:, 1:] = A + B
    He[np.diag_indices(pos.size + 1)] += np.concatenate([[0.0], kin])
    Ho = A - B
    Ho[np.diag_indices(pos.size)] += kin
    we, ve = _eigh_lowest(0.5 * (He + He.T), count)
    wo, vo = _eigh_lowest(0.5 * (Ho + Ho.T), count) if pos.size else (np.empty(0), np.empty((0, 0)))
    i0 = int(np.nonzero(modes == 0)[0][0])
    ip = i0 + np.arange(1, pos.size + 1)
    im = i0 - np.arange(1, pos.size + 1)
    vals = np.concatenate([we, wo])
    vecs = np.zeros((modes.size, vals.size), dtype=complex)
    r = 1.0 / math.sqrt(2.0)
    ne = we.size
    vecs[i0, :ne] = ve[0]
    vecs[ip, :ne] = r * ve[1:]
    vecs[im, :ne] = r * ve[1:]
    vecs[ip, ne:] = -1j * r * vo
    vecs[im, ne:] = 1j * r * vo
    order = np.argsort(vals, kind="stable")[: min(int(count), modes.size)]
    vecs = fix_phases(vecs[:, order], modes, reference)
    return SpectralResult(vals[order], vecs, modes, float(L), meta)


def solve_oscillatory(
    pot: TwoScalePotential,
    eps: float,
    alpha: float,
    L: float = DEFAULT_L,
    N_grid: int | None = DEFAULT_N_GRID,
    n: int = DEFAULT_N,
    count: int = 6,
    parity: str = "auto",
) -> SpectralResult:
    ms = mode_set(L, eps, n)
    if N_grid is None:
        N_grid = min_grid(ms.kmax)
    _check_grid(N_grid, ms)
    samples = sample_fast(pot, eps, alpha, grid_points(L, N_grid))
    meta = {
        "solver": "restricted",
        "eps": eps,
        "alpha": alpha,
        "L": L,
        "n": n,
        "N_grid": N_grid,
        "potential_hash": pot.content_hash(),
        "matrix_size": ms.size,
    }
    return solve_fourier(samples, L, ms.indices, count, meta=meta, parity=parity)


def full_grid_oracle(
    pot: TwoScalePotential, eps: float, alpha: float, L: float, N_full: int, count: int = 6, N_grid: int | None = None,
    parity: str = "auto",
) -> SpectralResult:
    nm = 2 * N_full + 1
    if nm > MAX_DENSE_MODES or 16.0 * nm * nm * 3 > MAX_DENSE_BYTES:
        raise MemoryError(f"{nm} modes exceed the dense memory budget")
    ms = full_mode_set(L, N_full)
    if N_grid is None:
        N_grid = min_grid(N_full)
    _check_grid(N_grid, ms)
    samples = sample_fast(pot, eps, alpha, grid_points(L, N_grid))
    meta = {"solver": "full", "eps": eps, "alpha": alpha, "L": L, "N_full": N_full, "N_grid": N_grid,
            "potential_hash": pot.content_hash(), "matrix_size": ms.size}
    return solve_fourier(samples, L, ms.indices, count, meta=meta, parity=parity)


def spectral_derivative(f: np.ndarray, L: float):
    npts = f.size
    k = np.fft.fftfreq(npts, d=2.0 * L / npts) * 2.0 * np.pi
    return np.fft.ifft(1j * k * np.fft.fft(f))


def rayleigh_quotient(pot: TwoScalePotential, eps: float, alpha: float, x, f):
    """(int |f'|^2 + q |f|^2) / int |f|^2 on a uniform periodic grid x_j = -L + j h."""
    x = np.asarray(x, float)
    f = np.asarray(f)
    h = x[1] - x[0]
    L = 0.5 * h * x.size
    df = spectral_derivative(f.astype(complex), L)
    q = sample_fast(pot, eps, alpha, x)
    num = np.sum(np.abs(df) ** 2 + q * np.abs(f) ** 2) * h
    return float(num / (np.sum(np.abs(f) ** 2) * h))
