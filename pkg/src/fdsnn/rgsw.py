"""RLWE and RGSW encryption, signed gadget decomposition, and the
external product used by blind rotation.

RGSW row layout: rows i < levels carry m*B^i on the mask polynomial,
rows levels+i carry m*B^i on the body, each on top of an RLWE(0) sample.
External product then reconstructs (m*a, m*b) from the signed digits of
the input ciphertext.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .params import FheParams, GadgetParams
from .lwe import sample_noise
from .ring import (
    NegacyclicPoly,
    center,
    div_round_half_away,
    get_transform,
    negacyclic_mul_raw,
    round_half_away,
)


@dataclass(frozen=True)
class RlweSecretKey:
    """Ring secret z(X) with binary coefficients."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.int64)
        if not np.all((z == 0) | (z == 1)):
            raise ParameterError("ring secret must have 0/1 coefficients")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def N(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class RlweCiphertext:
    """(a(X), b(X)) with b = a*z + e + (q/p)*m."""

    a: np.ndarray
    b: np.ndarray
    q: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.int64) % self.q
        b = np.asarray(self.b, dtype=np.int64) % self.q
        if a.shape != b.shape or a.ndim != 1:
            raise ParameterError("component polynomials must be equal-length vectors")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return len(self.a)

    def __add__(self, other: "RlweCiphertext") -> "RlweCiphertext":
        if self.q != other.q or self.N != other.N:
            raise ParameterError("RLWE params mismatch")
        return RlweCiphertext(self.a + other.a, self.b + other.b, self.q)


@dataclass(frozen=True)
class RgswCiphertext:
    """2*levels RLWE rows per the gadget convention above."""

    rows_a: np.ndarray  # (2*levels, N)
    rows_b: np.ndarray  # (2*levels, N)
    q: int
    gadget: GadgetParams


def rlwe_keygen(params: FheParams, rng: np.random.Generator) -> RlweSecretKey:
    return RlweSecretKey(rng.integers(0, 2, params.N))


def _rlwe_encrypt_raw(scaled_m: np.ndarray, zk: RlweSecretKey, params: FheParams,
                      rng: np.random.Generator, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Encrypt a q-domain polynomial (already scaled) under z."""
    N = params.N
    a = rng.integers(0, params.q, N)
    e = sample_noise(rng, sigma, N) if sigma > 0 else np.zeros(N, dtype=np.int64)
    b = (negacyclic_mul_raw(center(a, params.q), zk.z, params.q) + e + scaled_m) % params.q
    return a.astype(np.int64), b


def rlwe_encrypt(m: NegacyclicPoly, zk: RlweSecretKey, params: FheParams,
                 rng: np.random.Generator) -> RlweCiphertext:
    """Encrypt m(X) with coefficients in centered Z_p at scale q/p."""
    msg = center(m.coeffs, m.q) if m.q == params.p else np.asarray(m.coeffs, dtype=np.int64)
    if m.q != params.p:
        raise ParameterError("message polynomial must live in R_{p,N}")
    a, b = _rlwe_encrypt_raw((params.delta * msg) % params.q, zk, params, rng, params.sigma)
    return RlweCiphertext(a, b, params.q)


def rlwe_phase(ct: RlweCiphertext, zk: RlweSecretKey, params: FheParams) -> np.ndarray:
    return (ct.b - negacyclic_mul_raw(center(ct.a, params.q), zk.z, params.q)) % params.q


def rlwe_decrypt(ct: RlweCiphertext, zk: RlweSecretKey, params: FheParams) -> NegacyclicPoly:
    phase = center(rlwe_phase(ct, zk, params), params.q)
    m = div_round_half_away(phase * params.p, params.q) % params.p
    return NegacyclicPoly(m, params.p)


def gadget_decompose(coeffs: np.ndarray, q: int, g: GadgetParams) -> np.ndarray:
    """Signed digit decomposition of centered values, digits in (-B/2, B/2].

    Input (..., N) residues mod q; output (..., levels, N) int64 with
    sum_i digit_i * B^i == centered(input) exactly when B**levels >= q
    (enforced by FheParams), remainder bounded by q/(2*B**levels) otherwise.
    """
    B = g.base
    x = center(np.asarray(coeffs, dtype=np.int64) % q, q)
    digits = np.empty(x.shape[:-1] + (g.levels, x.shape[-1]), dtype=np.int64)
    for i in range(g.levels):
        d = ((x + B // 2 - 1) % B) - (B // 2 - 1)
        digits[..., i, :] = d
        x = (x - d) // B
    return digits


def gadget_recompose(digits: np.ndarray, g: GadgetParams) -> np.ndarray:
    powers = g.base ** np.arange(g.levels, dtype=np.int64)
    return np.tensordot(digits.swapaxes(-2, -1), powers, axes=([-1], [0]))


def rgsw_encrypt_poly(m: NegacyclicPoly, zk: RlweSecretKey, params: FheParams,
                      rng: np.random.Generator) -> RgswCiphertext:
    """RGSW encryption of a q-domain polynomial message (scale 1)."""
    g = params.gadget
    N = params.N
    msg = center(m.coeffs, m.q) if m.q != params.q else np.asarray(m.coeffs, dtype=np.int64)
    rows_a = np.empty((2 * g.levels, N), dtype=np.int64)
    rows_b = np.empty((2 * g.levels, N), dtype=np.int64)
    for i in range(g.levels):
        scale = g.base ** i
        a, b = _rlwe_encrypt_raw(np.zeros(N, dtype=np.int64), zk, params, rng, params.sigma_bk)
        rows_a[i] = (a + scale * msg) % params.q
        rows_b[i] = b
        a, b = _rlwe_encrypt_raw(np.zeros(N, dtype=np.int64), zk, params, rng, params.sigma_bk)
        rows_a[g.levels + i] = a
        rows_b[g.levels + i] = (b + scale * msg) % params.q
    return RgswCiphertext(rows_a, rows_b, params.q, g)


def rgsw_encrypt_bit(bit: int, zk: RlweSecretKey, params: FheParams,
                     rng: np.random.Generator) -> RgswCiphertext:
    if bit not in (0, 1):
        raise DomainError("rgsw_encrypt_bit expects 0 or 1")
    return rgsw_encrypt_poly(
        NegacyclicPoly.constant(bit, params.N, params.q), zk, params, rng
    )


def rgsw_encrypt_monomial(k: int, zk: RlweSecretKey, params: FheParams,
                          rng: np.random.Generator) -> RgswCiphertext:
    """RGSW(X^k) with the negacyclic sign wrap, k modulo 2N."""
    N = params.N
    k = int(k) % (2 * N)
    coeffs = np.zeros(N, dtype=np.int64)
    coeffs[k % N] = -1 if k >= N else 1
    return rgsw_encrypt_poly(NegacyclicPoly(coeffs, params.q), zk, params, rng)


def external_product(ct: RlweCiphertext, gct: RgswCiphertext, params: FheParams) -> RlweCiphertext:
    """RLWE x RGSW -> RLWE of the product message."""
    if ct.q != gct.q:
        raise ParameterError("modulus mismatch in external product")
    g = gct.gadget
    da = gadget_decompose(ct.a, params.q, g)  # (levels, N)
    db = gadget_decompose(ct.b, params.q, g)
    digits = np.concatenate([da, db], axis=0)  # (2*levels, N)
    tr = get_transform(params.N)
    dig_f = tr.forward(digits)
    rows_af = tr.forward(center(gct.rows_a, params.q))
    rows_bf = tr.forward(center(gct.rows_b, params.q))
    out_a = round_half_away(tr.inverse((dig_f * rows_af).sum(axis=0))) % params.q
    out_b = round_half_away(tr.inverse((dig_f * rows_bf).sum(axis=0))) % params.q
    return RlweCiphertext(out_a, out_b, params.q)
