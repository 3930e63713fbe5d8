"""LWE keys, encryption of centered Z_p messages, and the linear
homomorphic operations (WeightSum, plaintext add).

Mask components are sampled on the q/(2N) grid (see `FheParams.grid`) so
the modulus switch feeding blind rotation is exact.  Batch variants
operate on (count, n) / (count,) int64 arrays and are what the network
layers use; the single-ciphertext API wraps them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .params import FheParams
from .ring import center, div_round_half_away, round_half_away


@dataclass(frozen=True)
class LweSecretKey:
    """Binary secret of length n."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64)
        if s.ndim != 1 or not np.all((s == 0) | (s == 1)):
            raise ParameterError("secret key must be a 1-d 0/1 vector")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def n(self) -> int:
        return len(self.s)


@dataclass(frozen=True)
class LweCiphertext:
    """(a, b) with a in Z_q^n, b in Z_q."""

    a: np.ndarray
    b: int
    q: int

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.int64) % self.q
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", int(self.b) % self.q)

    @property
    def n(self) -> int:
        return len(self.a)


def check_message(m: int, p: int) -> int:
    """Validate m in the centered set Z_p = {-p/2+1, ..., p/2}."""
    m = int(m)
    if not (-p // 2 + 1 <= m <= p // 2):
        raise DomainError(f"message {m} outside centered Z_{p}")
    return m


def sample_noise(rng: np.random.Generator, sigma: float, shape=None):
    """Rounded Gaussian with parameter sigma."""
    return round_half_away(rng.normal(0.0, sigma, shape))


def lwe_keygen(params: FheParams, rng: np.random.Generator) -> LweSecretKey:
    return LweSecretKey(rng.integers(0, 2, params.n))


def encrypt_batch(ms, sk: LweSecretKey, params: FheParams,
                  rng: np.random.Generator, *, sigma: float | None = None):
    """Encrypt an int array of centered messages; returns (A, b) arrays."""
    ms = np.asarray(ms, dtype=np.int64).ravel()
    if np.any(ms < -params.p // 2 + 1) or np.any(ms > params.p // 2):
        raise DomainError("message outside centered Z_p")
    count = ms.size
    grid = params.grid
    A = rng.integers(0, params.q // grid, size=(count, params.n)) * grid
    sig = params.sigma if sigma is None else sigma
    e = sample_noise(rng, sig, count) if sig > 0 else np.zeros(count, dtype=np.int64)
    b = (A @ sk.s + e + params.delta * ms) % params.q
    return A.astype(np.int64), b.astype(np.int64)


def decrypt_batch(A, b, sk: LweSecretKey, params: FheParams):
    phase = center((np.asarray(b, dtype=np.int64) - np.asarray(A, dtype=np.int64) @ sk.s) % params.q, params.q)
    m = div_round_half_away(np.asarray(phase) * params.p, params.q) % params.p
    # Map residues into the message set {-p/2+1, ..., p/2}: the residue p/2
    # comes back as +p/2, matching the range encrypt accepts.
    half = params.p // 2
    return ((m + half - 1) % params.p) - (half - 1)


def encrypt(m: int, sk: LweSecretKey, params: FheParams,
            rng: np.random.Generator, *, sigma: float | None = None) -> LweCiphertext:
    check_message(m, params.p)
    A, b = encrypt_batch(np.asarray([m]), sk, params, rng, sigma=sigma)
    return LweCiphertext(A[0], int(b[0]), params.q)


def decrypt(ct: LweCiphertext, sk: LweSecretKey, params: FheParams) -> int:
    return int(decrypt_batch(ct.a[None, :], np.asarray([ct.b]), sk, params)[0])


def weight_sum(cts, weights) -> LweCiphertext:
    """Integer-weighted sum of ciphertexts under one key: realizes
    sum_j w_j * LWE(x_j) = LWE(sum_j w_j x_j)."""
    cts = list(cts)
    if not cts:
        raise DomainError("weight_sum of an empty ciphertext sequence")
    weights = np.asarray(list(weights), dtype=np.int64)
    if len(weights) != len(cts):
        raise ParameterError("weights and ciphertexts differ in length")
    q = cts[0].q
    n = cts[0].n
    for ct in cts:
        if ct.q != q or ct.n != n:
            raise ParameterError("ciphertexts disagree on params")
    A = np.stack([ct.a for ct in cts])
    b = np.asarray([ct.b for ct in cts], dtype=np.int64)
    return LweCiphertext(weights @ A % q, int(weights @ b % q), q)


def add_plain(ct: LweCiphertext, k: int, params: FheParams) -> LweCiphertext:
    """Shift the carried plaintext by k; a and the noise are untouched."""
    return LweCiphertext(ct.a, (ct.b + params.delta * int(k)) % params.q, params.q)


def add_plain_batch(b, k, params: FheParams):
    return (np.asarray(b, dtype=np.int64) + params.delta * np.asarray(k, dtype=np.int64)) % params.q


def noise_of(ct: LweCiphertext, sk: LweSecretKey, expected_m: int, params: FheParams) -> int:
    """Centered residual b - <a,s> - (q/p)m; test instrumentation only."""
    phase = (ct.b - int(ct.a @ sk.s)) % params.q
    resid = (phase - params.delta * int(expected_m)) % params.q
    return int(center(resid, params.q))


def noise_of_batch(A, b, sk: LweSecretKey, expected_ms, params: FheParams):
    phase = (np.asarray(b, dtype=np.int64) - np.asarray(A, dtype=np.int64) @ sk.s) % params.q
    resid = (phase - params.delta * np.asarray(expected_ms, dtype=np.int64)) % params.q
    return center(resid, params.q)
