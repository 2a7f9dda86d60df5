"""Finite y-Fourier series whose coefficients carry X-derivative stacks.

``data[d, p + P, j]`` holds the d-th X-derivative of the coefficient of
exp(2 pi i p y) at the sample X[j].  Products use Leibniz in d and
convolution in p, so every operation is exact on the closed-form inputs.
"""

from __future__ import annotations

from math import comb

import numpy as np

TWO_PI = 2.0 * np.pi


class HStack:
    __slots__ = ("data",)

    def __init__(self, data):
        self.data = np.asarray(data, dtype=complex)

    @property
    def depth(self) -> int:
        return self.data.shape[0] - 1

    @property
    def P(self) -> int:
        return (self.data.shape[1] - 1) // 2

    @property
    def harmonics(self):
        return np.arange(-self.P, self.P + 1)

    @classmethod
    def from_potential(cls, pot, X, depth: int) -> "HStack":
        X = np.atleast_1d(np.asarray(X, dtype=float))
        P = max(pot.max_harmonic, 1)
        data = np.zeros((depth + 1, 2 * P + 1, X.size), dtype=complex)
        for m in pot.harmonics:
            for d in range(depth + 1):
                data[d, m + P] = pot.coefficient_derivative(m, d, X)
        return cls(data)

    @classmethod
    def constant(cls, values, depth: int) -> "HStack":
        """y-independent function given by its derivative stack (depth+1, n)."""
        values = np.asarray(values, dtype=complex)
        data = np.zeros((depth + 1, 1, values.shape[-1]), dtype=complex)
        data[:, 0] = values[: depth + 1]
        return cls(data)

    def truncate(self, depth: int) -> "HStack":
        return HStack(self.data[: depth + 1])

    def pad(self, P: int) -> "HStack":
        if P <= self.P:
            return self
        k = P - self.P
        return HStack(np.pad(self.data, ((0, 0), (k, k), (0, 0))))

    def _align(self, other):
        D = min(self.depth, other.depth)
        P = max(self.P, other.P)
        return self.truncate(D).pad(P), other.truncate(D).pad(P)

    def __add__(self, other):
        a, b = self._align(other)
        return HStack(a.data + b.data)

    def __sub__(self, other):
        a, b = self._align(other)
        return HStack(a.data - b.data)

    def __neg__(self):
        return HStack(-self.data)

    def __mul__(self, other):
        if isinstance(other, HStack):
            return self.product(other)
        return HStack(self.data * other)

    __rmul__ = __mul__

    def dy(self, k: int = 1) -> "HStack":
        fac = (2j * np.pi * self.harmonics) ** k
        return HStack(self.data * fac[None, :, None])

    def dX(self, k: int = 1) -> "HStack":
        if k > self.depth:
            raise ValueError("not enough X-derivatives stored")
        return HStack(self.data[k:])

    def mean(self):
        return self.data[:, self.P]

    def zero_mean(self) -> "HStack":
        d = self.data.copy()
        d[:, self.P] = 0.0
        return HStack(d)

    def inv_dyy(self) -> "HStack":
        """Mean-zero solution u of d_y^2 u = self (mean of self discarded)."""
        p = self.harmonics.astype(float)
        fac = np.zeros_like(p)
        nz = p != 0
        fac[nz] = -1.0 / (TWO_PI * p[nz]) ** 2
        return HStack(self.data * fac[None, :, None])

    def product(self, other: "HStack") -> "HStack":
        D = min(self.depth, other.depth)
        Pa, Pb = self.P, other.P
        P = Pa + Pb
        out = np.zeros((D + 1, 2 * P + 1, self.data.shape[2]), dtype=complex)
        # drop all-zero harmonics up front
        ia = [i for i in range(2 * Pa + 1) if np.any(self.data[: D + 1, i])]
        ib = [i for i in range(2 * Pb + 1) if np.any(other.data[: D + 1, i])]
        for d in range(D + 1):
            acc = out[d]
            for j in range(d + 1):
                c = comb(d, j)
                A = self.data[j]
                B = other.data[d - j]
                for i1 in ia:
                    a = A[i1]
                    for i2 in ib:
                        acc[i1 + i2] += c * a * B[i2]
        res = HStack(out)
        return res.trim()

    def trim(self) -> "HStack":
        d = self.data
        P = self.P
        while P > 1 and not np.any(d[:, 0]) and not np.any(d[:, -1]):
            d = d[:, 1:-1]
            P -= 1
        return HStack(d)

    def evaluate(self, y, d: int = 0):
        """Sum over p of the d-th X-derivative coefficient times e^{2 pi i p y}."""
        y = np.asarray(y, dtype=float)
        phase = np.exp(2j * np.pi * np.outer(self.harmonics, y).reshape(2 * self.P + 1, *y.shape))
        return np.sum(self.data[d] * phase, axis=0)

    def evaluate_real(self, y, d: int = 0):
        return self.evaluate(y, d).real
