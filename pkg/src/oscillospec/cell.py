"""Cell problem and effective potentials.

The corrector Q solves d_y^2 Q = q with zero y-mean, harmonic by harmonic
``Q_m = -q_m / (4 pi^2 m^2)``.  From it

    V0(X) = -int |d_y Q|^2 dy = -sum_m |q_m|^2 / (4 pi^2 m^2)
    V1(X) = 2 int (d_X Q)(d_y Q) dy

are evaluated spectrally, never on a y-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
from scipy import integrate

from ._series import HStack
from .potential import TwoScalePotential

MAX_V_ORDER = 3
INTEGRAL_TOL = 1e-12


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CellSolution:
    potential: TwoScalePotential

    # -- corrector -------------------------------------------------------
    def Q_coefficient(self, m: int, X, order: int = 0):
        if m == 0:
            return np.zeros(np.shape(X), dtype=complex)
        return -self.potential.coefficient_derivative(m, order, X) / (4.0 * math.pi**2 * m * m)

    def Q(self, X, y):
        out = np.zeros(np.broadcast(np.asarray(X), np.asarray(y)).shape)
        for m in self.potential.harmonics:
            out = out + (self.Q_coefficient(m, X) * np.exp(2j * math.pi * m * np.asarray(y))).real
        return out

    def Q_stack(self, X, depth: int) -> HStack:
        return HStack.from_potential(self.potential, X, depth).inv_dyy()

    # -- effective potentials ---------------------------------------------
    def V0_derivative(self, X, order: int = 0):
        if not 0 <= order <= MAX_V_ORDER:
            raise ValueError(f"V0 derivative order must be in 0..{MAX_V_ORDER}")
        return self._V0_any(X, order)

    def _V0_any(self, X, order: int):
        X = np.asarray(X, dtype=float)
        pot = self.potential
        out = np.zeros(X.shape)
        for m in pot.harmonics:
            acc = np.zeros(X.shape, dtype=complex)
            for j in range(order + 1):
                acc += comb(order, j) * pot.coefficient_derivative(m, j, X) * np.conj(
                    pot.coefficient_derivative(m, order - j, X)
                )
            out -= acc.real / (4.0 * math.pi**2 * m * m)
        return out

    def _V1_any(self, X, order: int):
        # V1 = Re sum_m (-i / (4 pi^3 m^3)) q_m' conj(q_m)
        X = np.asarray(X, dtype=float)
        pot = self.potential
        out = np.zeros(X.shape)
        for m in pot.harmonics:
            acc = np.zeros(X.shape, dtype=complex)
            for j in range(order + 1):
                acc += comb(order, j) * pot.coefficient_derivative(m, j + 1, X) * np.conj(
                    pot.coefficient_derivative(m, order - j, X)
                )
            out += (-1j * acc / (4.0 * math.pi**3 * m**3)).real
        return out

    def V0(self, X):
        return self._V0_any(X, 0)

    def V1(self, X):
        return self._V1_any(X, 0)

    def V1_derivative(self, X, order: int = 0):
        if not 0 <= order <= MAX_V_ORDER:
            raise ValueError(f"V1 derivative order must be in 0..{MAX_V_ORDER}")
        return self._V1_any(X, order)

    # -- integrals ---------------------------------------------------------
    def _integrate(self, f) -> float:
        R = self.potential.support_radius(1e-16)
        if R == 0.0:
            return 0.0
        if math.isinf(R):
            pieces = [(-np.inf, 0.0), (0.0, np.inf)]
        else:
            pieces = [(-R, 0.0), (0.0, R)]
        total = 0.0
        for a, b in pieces:
            val, err, *rest = integrate.quad(
                lambda s: float(f(np.array(s))), a, b, epsabs=INTEGRAL_TOL, epsrel=0.0, limit=400, full_output=1
            )
            if len(rest) == 2 or err > 10 * INTEGRAL_TOL:
                raise IntegrationError(f"quadrature did not converge (error estimate {err:.2e})")
            total += val
        return total

    @cached_property
    def integral_V0(self) -> float:
        return self._integrate(self.V0)

    @cached_property
    def integral_absV0(self) -> float:
        return self._integrate(lambda s: np.abs(self.V0(s)))

    @cached_property
    def integral_V1(self) -> float:
        return self._integrate(self.V1)


def solve_cell(potential: TwoScalePotential) -> CellSolution:
    return CellSolution(potential)


def effective_V0(cell: CellSolution, X):
    return cell.V0(X)


def effective_V1(cell: CellSolution, X):
    return cell.V1(X)
