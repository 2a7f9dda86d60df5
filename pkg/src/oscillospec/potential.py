"""Two-scale potentials q(X, y), periodic and mean-zero in y.

A potential is a finite sum of y-harmonics with closed-form slow envelopes::

    q(X, y) = sum_m q_m(X) exp(2 pi i m y),    q_0 = 0.

Real potentials are declared once per positive harmonic: a term
``(m, a, theta)`` stands for ``a(X) cos(2 pi m y + theta)``, i.e.
``q_m = a e^{i theta} / 2`` and ``q_{-m} = conj(q_m)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_hermite

MAX_PUBLIC_ORDER = 5
ENVELOPE_KINDS = ("gaussian", "sech2", "rational-decay")


@dataclass(frozen=True)
class EnvelopeProfile:
    """Slow envelope a(X) with closed-form derivatives of every order.

    With ``u = X / sqrt(width)``:

    - gaussian:        amplitude * exp(-u^2)
    - sech2:           amplitude * sech(u)^2
    - rational-decay:  amplitude / (1 + u^2)
    """

    kind: str
    amplitude: float
    width: float

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError("envelope width must be positive and finite")
        if not math.isfinite(self.amplitude):
            raise ValueError("envelope amplitude must be finite")

    def derivative(self, X, order: int = 0):
        """Exact ``order``-th derivative; any order >= 0 is accepted here."""
        if order < 0:
            raise ValueError("derivative order must be non-negative")
        X = np.asarray(X, dtype=float)
        s = math.sqrt(self.width)
        u = X / s
        if self.kind == "gaussian":
            # d^l/du^l exp(-u^2) = (-1)^l H_l(u) exp(-u^2)
            val = (-1) ** order * eval_hermite(order, u) * np.exp(-u * u)
        elif self.kind == "sech2":
            val = _sech2_derivative(u, order)
        else:
            # 1/(1+u^2) = Im 1/(u - i)
            z = (u - 1j) ** (-(order + 1))
            val = ((-1) ** order * math.factorial(order) * z).imag
        return self.amplitude * val / s**order

    def __call__(self, X):
        return self.derivative(X, 0)

    def support_radius(self, rel_tol: float = 1e-16) -> float:
        """Radius beyond which |a| < rel_tol * |amplitude| (inf if algebraic decay)."""
        s = math.sqrt(self.width)
        if self.kind == "gaussian":
            return s * math.sqrt(math.log(1.0 / rel_tol))
        if self.kind == "sech2":
            return s * 0.5 * math.log(4.0 / rel_tol)
        return math.inf

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "width": self.width}


def _sech2_derivative(u, order):
    # sech^2 = 1 - t^2 with t = tanh u and dt/du = 1 - t^2, so every
    # derivative is a polynomial in t.
    poly = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    one_minus_t2 = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    for _ in range(order):
        poly = poly.deriv() * one_minus_t2
    return poly(np.tanh(u))


@dataclass(frozen=True)
class Term:
    harmonic: int
    envelope: EnvelopeProfile
    phase: float = 0.0


@dataclass(frozen=True)
class TwoScalePotential:
    """Finite harmonic sum; immutable.

    When ``mirror`` is true each term is a real cosine (the conjugate
    harmonic is implied).  Otherwise each term is a raw coefficient
    ``a(X) e^{i phase}`` at its harmonic and the list must pair every term
    with its conjugate.
    """

    terms: tuple = ()
    mirror: bool = True
    _coeffs: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        coeffs: dict[int, list] = {}
        for t in terms:
            m = int(t.harmonic)
            if m == 0:
                raise ValueError("harmonic 0 is excluded (q must be mean-zero in y)")
            if self.mirror:
                if m < 0:
                    raise ValueError("mirrored potentials take positive harmonics only")
                coeffs.setdefault(m, []).append((0.5, t.envelope, t.phase))
                coeffs.setdefault(-m, []).append((0.5, t.envelope, -t.phase))
            else:
                coeffs.setdefault(m, []).append((1.0, t.envelope, t.phase))
        object.__setattr__(self, "_coeffs", coeffs)
        if not self.mirror and not self.symmetric:
            raise ValueError("non-mirrored terms must pair with their conjugates")

    @property
    def symmetric(self) -> bool:
        if self.mirror:
            return True
        probe = np.linspace(-3.0, 3.0, 7)
        for m in self._coeffs:
            a = self.y_coefficient(m, probe)
            b = self.y_coefficient(-m, probe)
            if not np.allclose(a, np.conj(b), rtol=1e-13, atol=1e-300):
                return False
        return True

    @property
    def harmonics(self) -> list[int]:
        return sorted(self._coeffs)

    @property
    def max_harmonic(self) -> int:
        return max((abs(m) for m in self._coeffs), default=0)

    @property
    def is_zero(self) -> bool:
        return all(e.amplitude == 0.0 for _, e, _ in self._all())

    def _all(self):
        for m, lst in self._coeffs.items():
            for item in lst:
                yield item

    def coefficient_derivative(self, m: int, order: int, X):
        """``order``-th X-derivative of q_m; unrestricted order (internal use)."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape, dtype=complex)
        for w, env, ph in self._coeffs.get(int(m), ()):
            out += w * np.exp(1j * ph) * env.derivative(X, order)
        return out

    def y_coefficient(self, m: int, X):
        return self.coefficient_derivative(m, 0, X)

    def envelope_derivative(self, m: int, order: int, X):
        if not 0 <= order <= MAX_PUBLIC_ORDER:
            raise ValueError(f"derivative order must be in 0..{MAX_PUBLIC_ORDER}")
        return self.coefficient_derivative(m, order, X)

    def __call__(self, X, y):
        return self.eval_q(X, y)

    def eval_q(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        X, y = np.broadcast_arrays(X, y)
        out = np.zeros(X.shape)
        for m in self._coeffs:
            if m < 0 and self.mirror:
                continue
            c = self.y_coefficient(m, X)
            e = np.exp(2j * np.pi * m * y)
            if self.mirror:
                out += 2.0 * (c * e).real
            else:
                out += (c * e).real
        return out

    def scaled(self, s: float) -> "TwoScalePotential":
        terms = tuple(
            Term(t.harmonic, EnvelopeProfile(t.envelope.kind, s * t.envelope.amplitude, t.envelope.width), t.phase)
            for t in self.terms
        )
        return TwoScalePotential(terms, self.mirror)

    def support_radius(self, rel_tol: float = 1e-16) -> float:
        radii = [t.envelope.support_radius(rel_tol) for t in self.terms if t.envelope.amplitude != 0]
        return max(radii, default=0.0)

    def to_spec(self) -> dict:
        spec = {
            "terms": [
                {"harmonic": t.harmonic, "envelope": t.envelope.to_dict(), "phase": t.phase}
                for t in self.terms
            ]
        }
        if not self.mirror:
            spec["mirror"] = False
        return spec

    @classmethod
    def from_spec(cls, spec: dict) -> "TwoScalePotential":
        try:
            raw = spec["terms"]
        except (KeyError, TypeError):
            raise ValueError("potential block needs a 'terms' list") from None
        terms = []
        for t in raw:
            env = t["envelope"]
            terms.append(
                Term(
                    int(t["harmonic"]),
                    EnvelopeProfile(str(env["kind"]), float(env["amplitude"]), float(env["width"])),
                    float(t.get("phase", 0.0)),
                )
            )
        return cls(tuple(terms), bool(spec.get("mirror", True)))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_spec(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def default_potential() -> TwoScalePotential:
    """q(X, y) = 4 cos(2 pi y) exp(-X^2/8)."""
    return TwoScalePotential((Term(1, EnvelopeProfile("gaussian", 4.0, 8.0), 0.0),))


def zero_potential() -> TwoScalePotential:
    return TwoScalePotential((Term(1, EnvelopeProfile("gaussian", 0.0, 8.0), 0.0),))


@dataclass(frozen=True)
class ScalingPair:
    beta: float
    alpha: float
    eps_original: float | None = None
    eps_rescaled: float | None = None


def scaling_map(beta: float, eps_original: float | None = None) -> ScalingPair:
    """alpha = beta/(2 - beta) and eps = eps_original^(1 - beta/2)."""
    beta = float(beta)
    if not 0.0 <= beta < 2.0:
        raise ValueError("beta must lie in [0, 2)")
    alpha = beta / (2.0 - beta)
    eps = None if eps_original is None else float(eps_original) ** (1.0 - beta / 2.0)
    return ScalingPair(beta, alpha, eps_original, eps)


def scaling_map_inv(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > -1.0:
        raise ValueError("alpha must exceed -1")
    return 2.0 * alpha / (1.0 + alpha)
