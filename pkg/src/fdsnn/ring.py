"""Exact arithmetic in Z_q and the negacyclic ring Z_q[X]/(X^N + 1).

All moduli in this package are powers of two, so reduction is bit masking
and the fast multiplication path can be validated to be exact in double
precision (see `NegacyclicTransform`).

Rounding everywhere is round-half-away-from-zero on centered
representatives; `round_half_away` / `rescale` are the single source of
truth for that rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import ParameterError


def is_power_of_two(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


def center(values, q: int):
    """Map residues in [0, q) to centered representatives in [-q/2, q/2)."""
    v = np.asarray(values, dtype=np.int64)
    out = np.where(v >= q // 2, v - q, v)
    if out.ndim == 0:
        return int(out)
    return out


def round_half_away(x):
    """Round to nearest integer, ties away from zero (vectorized, float input)."""
    x = np.asarray(x)
    out = np.where(x >= 0, np.floor(x + 0.5), np.ceil(x - 0.5))
    if out.ndim == 0:
        return int(out)
    return out.astype(np.int64)


def div_round_half_away(num, den: int):
    """Exact integer round-half-away of num/den for den > 0."""
    num = np.asarray(num, dtype=np.int64)
    mag = np.abs(num)
    r = (2 * mag + den) // (2 * den)
    out = np.where(num >= 0, r, -r)
    if out.ndim == 0:
        return int(out)
    return out


def rescale(x, q1: int, q2: int):
    """round(x * q2 / q1) mod q2 on the centered representative of x mod q1."""
    if not (is_power_of_two(q1) and is_power_of_two(q2)):
        raise ParameterError("moduli must be powers of two")
    c = center(np.asarray(x, dtype=np.int64) % q1, q1)
    if q1 >= q2:
        out = div_round_half_away(c * q2, q1) % q2
    else:
        out = (c * (q2 // q1)) % q2
    if np.ndim(x) == 0:
        return int(np.asarray(out))
    return out


@dataclass(frozen=True)
class ZqElement:
    """A residue modulo q, kept in canonical range [0, q)."""

    value: int
    q: int

    def __post_init__(self):
        if not is_power_of_two(self.q):
            raise ParameterError("q must be a power of two")
        object.__setattr__(self, "value", int(self.value) % self.q)

    @property
    def centered(self) -> int:
        return self.value - self.q if self.value >= self.q // 2 else self.value

    def __add__(self, other: "ZqElement") -> "ZqElement":
        self._check(other)
        return ZqElement(self.value + other.value, self.q)

    def __sub__(self, other: "ZqElement") -> "ZqElement":
        self._check(other)
        return ZqElement(self.value - other.value, self.q)

    def __mul__(self, other: "ZqElement") -> "ZqElement":
        self._check(other)
        return ZqElement(self.value * other.value, self.q)

    def _check(self, other):
        if self.q != other.q:
            raise ParameterError("modulus mismatch")


class NegacyclicTransform:
    """Length-N negacyclic convolution via a half-size complex FFT.

    A real polynomial a(X) mod X^N+1 is evaluated at the N/2 primitive
    2N-th roots of unity zeta^(4j+1); the conjugate evaluations are implied
    by realness.  Folding: c_k = (a_k + i*a_{k+N/2}) * zeta^k, then a
    length-N/2 DFT with e^{+2*pi*i*jk/(N/2)} kernel.

    Exactness: products recovered by rounding are exact as long as
    N * max|a| * max|b| stays well below 2^53 / log2(N); the presets are
    validated against the schoolbook path in the test suite.
    """

    def __init__(self, N: int):
        if not is_power_of_two(N) or N < 2:
            raise ParameterError("N must be a power of two >= 2")
        self.N = N
        half = N // 2
        k = np.arange(half)
        self.twist = np.exp(1j * np.pi * k / N)
        self.untwist = np.conj(self.twist)

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        """(..., N) int/float -> (..., N/2) complex evaluations."""
        half = self.N // 2
        a = np.asarray(coeffs, dtype=np.float64)
        c = (a[..., :half] + 1j * a[..., half:]) * self.twist
        # e^{+i...} kernel == unnormalized inverse FFT
        return _fft.ifft(c, axis=-1, norm="forward")

    def inverse(self, evals: np.ndarray) -> np.ndarray:
        """(..., N/2) complex -> (..., N) float coefficients (unrounded)."""
        c = _fft.fft(evals, axis=-1, norm="backward") / (self.N // 2)
        c = c * self.untwist
        return np.concatenate([c.real, c.imag], axis=-1)


@lru_cache(maxsize=None)
def get_transform(N: int) -> NegacyclicTransform:
    return NegacyclicTransform(N)


@dataclass(frozen=True)
class NegacyclicPoly:
    """Element of Z_q[X]/(X^N + 1); coeffs always reduced into [0, q)."""

    coeffs: np.ndarray
    q: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.int64) % self.q
        if not is_power_of_two(len(c)):
            raise ParameterError("N must be a power of two")
        if not is_power_of_two(self.q):
            raise ParameterError("q must be a power of two")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return len(self.coeffs)

    @property
    def centered(self) -> np.ndarray:
        return center(self.coeffs, self.q)

    def __add__(self, other: "NegacyclicPoly") -> "NegacyclicPoly":
        self._check(other)
        return NegacyclicPoly(self.coeffs + other.coeffs, self.q)

    def __sub__(self, other: "NegacyclicPoly") -> "NegacyclicPoly":
        self._check(other)
        return NegacyclicPoly(self.coeffs - other.coeffs, self.q)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NegacyclicPoly)
            and self.q == other.q
            and self.N == other.N
            and bool(np.array_equal(self.coeffs, other.coeffs))
        )

    def _check(self, other):
        if self.q != other.q or self.N != other.N:
            raise ParameterError("ring mismatch (N or q differ)")

    @staticmethod
    def zero(N: int, q: int) -> "NegacyclicPoly":
        return NegacyclicPoly(np.zeros(N, dtype=np.int64), q)

    @staticmethod
    def constant(c: int, N: int, q: int) -> "NegacyclicPoly":
        coeffs = np.zeros(N, dtype=np.int64)
        coeffs[0] = c % q
        return NegacyclicPoly(coeffs, q)


def poly_mul_schoolbook(a: NegacyclicPoly, b: NegacyclicPoly) -> NegacyclicPoly:
    """Exact O(N^2) negacyclic product; the oracle for the fast path."""
    a._check(b)
    full = np.convolve(a.centered, b.centered)
    low = full[: a.N]
    high = np.zeros(a.N, dtype=np.int64)
    high[: len(full) - a.N] = full[a.N :]
    return NegacyclicPoly(low - high, a.q)


def negacyclic_mul_raw(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Fast negacyclic product of centered int arrays (..., N), reduced mod q."""
    N = a.shape[-1]
    tr = get_transform(N)
    prod = tr.inverse(tr.forward(a) * tr.forward(b))
    return round_half_away(prod) % q


def poly_mul(a: NegacyclicPoly, b: NegacyclicPoly) -> NegacyclicPoly:
    """Negacyclic product via the transform fast path (exact at preset sizes)."""
    a._check(b)
    if a.N < 4:
        return poly_mul_schoolbook(a, b)
    return NegacyclicPoly(negacyclic_mul_raw(a.centered, b.centered, a.q), a.q)


def monomial_rotate_raw(coeffs: np.ndarray, k, N: int) -> np.ndarray:
    """X^k * p(X) on raw coefficient arrays.

    Vectorized over leading axes; `k` may be scalar or one rotation per row
    (shape matching coeffs.shape[:-1]).
    """
    k = np.asarray(k, dtype=np.int64) % (2 * N)
    j = np.arange(N, dtype=np.int64)
    src = (j - k[..., None]) % (2 * N)
    sign = np.where(src >= N, -1, 1)
    idx = src % N
    gathered = np.take_along_axis(
        np.broadcast_to(coeffs, sign.shape[:-1] + coeffs.shape[-1:]) if coeffs.ndim < sign.ndim else coeffs,
        idx,
        axis=-1,
    )
    return sign * gathered


def monomial_rotate(p: NegacyclicPoly, k: int) -> NegacyclicPoly:
    """Multiply by X^k with the X^N = -1 sign wrap; k taken modulo 2N."""
    return NegacyclicPoly(monomial_rotate_raw(p.coeffs, int(k), p.N), p.q)
