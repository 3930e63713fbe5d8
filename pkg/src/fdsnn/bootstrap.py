"""Programmable bootstrapping: Initialize -> BlindRotate -> Extract -> KeySwitch.

Blind rotation is GINX-style over binary LWE secrets:
    ACC <- ACC + (X^{a_i} - 1) * (ACC (x) ek_i),   ek_i = RGSW(s_i),
which multiplies the accumulator by X^{a_i * s_i}.  The hot path is
batched: a whole layer of ciphertexts is rotated together, with the
per-step rotate/diff/decompose fused in a numba kernel when available
and the polynomial products done through the cached negacyclic
transform of the bootstrap key.

Because mask components live on the q/(2N) grid, the modulus switch to
Z_2N is exact and the rotation lands on the message's test-vector slot
whenever |noise| < q/(2p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .lwe import LweCiphertext, LweSecretKey, sample_noise
from .params import FheParams, GadgetParams
from .rgsw import (
    RgswCiphertext,
    RlweCiphertext,
    RlweSecretKey,
    gadget_decompose,
    rgsw_encrypt_bit,
)
from .ring import center, get_transform, monomial_rotate_raw, rescale, round_half_away

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


class ProgramFunction:
    """A negacyclic lookup table g: Z_p -> Z_p.

    `table[v % p]` is g(v) represented in the message set
    {-p/2+1, ..., p/2}, the same convention decrypt uses.  The negacyclic
    constraint g(v + p/2) = -g(v) (mod p) is enforced at construction.
    """

    def __init__(self, table, p: int):
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (p,):
            raise ParameterError(f"program table must have length p={p}")
        self.p = p
        half = p // 2
        as_resid = table % p
        if not np.array_equal(np.roll(as_resid, -half), (-as_resid) % p):
            raise DomainError("program function violates g(v + p/2) = -g(v)")
        self.table = ((as_resid + half - 1) % p) - (half - 1)
        self.table.setflags(write=False)

    def __call__(self, m) -> np.ndarray | int:
        out = self.table[np.asarray(m) % self.p]
        return out

    def __eq__(self, other):
        return (
            isinstance(other, ProgramFunction)
            and self.p == other.p
            and np.array_equal(self.table, other.table)
        )


def make_program(g_values, p: int) -> ProgramFunction:
    """Build a ProgramFunction from values on the positive half [0, p/2).

    `g_values` is a callable or a mapping from m in [0, p/2) to centered
    Z_p values; the negative half is filled by antisymmetry.
    """
    half = p // 2
    table = np.zeros(p, dtype=np.int64)
    getter = g_values if callable(g_values) else g_values.__getitem__
    for v in range(half):
        table[v] = int(getter(v))
    for v in range(half, p):
        table[v] = -table[v - half]
    return ProgramFunction(table, p)


def test_polynomial(g: ProgramFunction, params: FheParams) -> np.ndarray:
    """Coefficient i = (q/p) * g(floor(i * p / 2N)), as residues mod q."""
    if g.p != params.p:
        raise ParameterError("program function is for a different message modulus")
    i = np.arange(params.N, dtype=np.int64)
    slots = (i * params.p) // (2 * params.N)
    return (params.delta * g.table[slots]) % params.q


@dataclass(frozen=True)
class KeySwitchKey:
    """LWE encryptions (scale 1) of z_j * base^i under s, on the mask grid."""

    A: np.ndarray  # (N * levels, n)
    b: np.ndarray  # (N * levels,)
    base: int
    levels: int
    N: int

    def digest_arrays(self):
        return [self.A, self.b]


class BootstrapKey:
    """n RGSW bit encryptions of the LWE secret plus the key-switch key.

    Read-only after generation; `bootstrap_count` is incremented once per
    ciphertext bootstrapped (test/stats instrumentation).
    """

    def __init__(self, ek: list[RgswCiphertext], ksk: KeySwitchKey, params: FheParams):
        self.ek = ek
        self.ksk = ksk
        self.params = params
        self.bootstrap_count = 0
        tr = get_transform(params.N)
        rows = np.stack(
            [np.stack([center(e.rows_a, params.q), center(e.rows_b, params.q)], axis=1)
             for e in ek]
        )  # (n, 2*levels, 2, N)
        self._ek_fft = tr.forward(rows)  # (n, 2*levels, 2, N/2) complex

    @property
    def n(self) -> int:
        return len(self.ek)


def gen_key_switch_key(zk: RlweSecretKey, sk: LweSecretKey, params: FheParams,
                       rng: np.random.Generator) -> KeySwitchKey:
    N, n = params.N, params.n
    base, levels = params.ks_base, params.ks_levels
    count = N * levels
    grid = params.grid
    A = (rng.integers(0, params.q // grid, size=(count, n)) * grid).astype(np.int64)
    e = sample_noise(rng, params.sigma_ks, count)
    powers = base ** np.arange(levels, dtype=np.int64)
    payload = (zk.z[:, None] * powers[None, :]).ravel()  # index j*levels + i
    b = (A @ sk.s + e + payload) % params.q
    return KeySwitchKey(A, b.astype(np.int64), base, levels, N)


def gen_bootstrap_key(sk: LweSecretKey, zk: RlweSecretKey, params: FheParams,
                      rng: np.random.Generator) -> BootstrapKey:
    ek = [rgsw_encrypt_bit(int(s_i), zk, params, rng) for s_i in sk.s]
    ksk = gen_key_switch_key(zk, sk, params, rng)
    return BootstrapKey(ek, ksk, params)


def initialize_accumulator(g: ProgramFunction, b2N: int, params: FheParams) -> RlweCiphertext:
    """Noiseless RLWE carrying X^{-b2N} * testpoly(g)."""
    v = test_polynomial(g, params)
    rotated = monomial_rotate_raw(v, -int(b2N) % (2 * params.N), params.N)
    return RlweCiphertext(np.zeros(params.N, dtype=np.int64), rotated, params.q)


# ---------------------------------------------------------------------------
# batched rotation engine
# ---------------------------------------------------------------------------

def _rot_diff_decompose_numpy(acc, k, q, base, levels):
    """rotate-by-k minus identity, then signed digits; acc (B,2,N) int64."""
    B, _, N = acc.shape
    j = np.arange(N, dtype=np.int64)
    src = (j[None, :] - k[:, None]) % (2 * N)
    sign = np.where(src >= N, -1, 1)[:, None, :]
    idx = np.broadcast_to((src % N)[:, None, :], acc.shape)
    diff = (sign * np.take_along_axis(acc, idx, axis=2) - acc) % q
    dig = gadget_decompose(diff, q, GadgetParams(base, levels))  # (B,2,levels,N)
    return dig.reshape(B, 2 * levels, N)


def _rotate_step_numpy(acc, k, bsk_ek_f, tr, q, base, levels):
    digits = _rot_diff_decompose_numpy(acc, k, q, base, levels)
    dig_f = tr.forward(digits)  # (B, 2l, N/2)
    prod_f = np.einsum("bdn,don->bon", dig_f, bsk_ek_f)
    return (acc + round_half_away(tr.inverse(prod_f))) % q


if _HAVE_NUMBA:

    # All moduli are powers of two, so reductions are bit masks; the fold
    # and twist of the negacyclic transform are fused in to avoid extra
    # passes over the digit arrays.
    @_njit(cache=True)
    def _fold_twist_kernel(acc, k, twist, out, q, base, levels):  # pragma: no cover
        B, _, N = acc.shape
        N2 = N // 2
        mask2N = 2 * N - 1
        qmask = q - 1
        halfq = q >> 1
        bmask = base - 1
        halfB = base >> 1
        shift = 0
        while (1 << shift) < base:
            shift += 1
        for bi in range(B):
            kk = k[bi]
            for c in range(2):
                for j in range(N2):
                    x1 = 0
                    x2 = 0
                    for half in range(2):
                        jj = j + half * N2
                        s = (jj - kk) & mask2N
                        if s >= N:
                            v = -acc[bi, c, s - N]
                        else:
                            v = acc[bi, c, s]
                        x = (v - acc[bi, c, jj]) & qmask
                        if x >= halfq:
                            x -= q
                        if half == 0:
                            x1 = x
                        else:
                            x2 = x
                    for i in range(levels):
                        d1 = ((x1 + halfB - 1) & bmask) - (halfB - 1)
                        d2 = ((x2 + halfB - 1) & bmask) - (halfB - 1)
                        x1 = (x1 - d1) >> shift
                        x2 = (x2 - d2) >> shift
                        out[bi, c * levels + i, j] = complex(d1, d2) * twist[j]

    @_njit(cache=True)
    def _untwist_round_add_kernel(acc, y, untwist, q):  # pragma: no cover
        # y: unnormalized length-N/2 FFT of the products; finishes the
        # inverse transform, rounds to exact integers, adds into acc mod q.
        B, _, N = acc.shape
        N2 = N // 2
        qmask = q - 1
        inv = 1.0 / N2
        for bi in range(B):
            for c in range(2):
                for j in range(N2):
                    z = y[bi, c, j] * untwist[j] * inv
                    re = z.real
                    im = z.imag
                    r1 = int(np.floor(re + 0.5)) if re >= 0 else int(np.ceil(re - 0.5))
                    r2 = int(np.floor(im + 0.5)) if im >= 0 else int(np.ceil(im - 0.5))
                    acc[bi, c, j] = (acc[bi, c, j] + r1) & qmask
                    acc[bi, c, j + N2] = (acc[bi, c, j + N2] + r2) & qmask


def blind_rotate_batch(acc: np.ndarray, a2N: np.ndarray, bsk: BootstrapKey) -> np.ndarray:
    """Rotate a batch of accumulators by the encrypted phases.

    acc: (B, 2, N) int64 [mask, body]; a2N: (B, n) residues mod 2N.
    Returns the rotated accumulators (same layout).
    """
    params = bsk.params
    q = params.q
    g = params.gadget
    N2 = params.N // 2
    tr = get_transform(params.N)
    acc = np.ascontiguousarray(acc)
    if not _HAVE_NUMBA:  # pragma: no cover
        for i in range(bsk.n):
            k = np.ascontiguousarray(a2N[:, i])
            if k.any():
                acc = _rotate_step_numpy(acc, k, bsk._ek_fft[i], tr, q, g.base, g.levels)
        return acc
    B = acc.shape[0]
    folded = np.empty((B, 2 * g.levels, N2), dtype=np.complex128)
    from scipy import fft as _sfft
    for i in range(bsk.n):
        k = np.ascontiguousarray(a2N[:, i])
        if not k.any():
            continue
        _fold_twist_kernel(acc, k, tr.twist, folded, q, g.base, g.levels)
        dig_f = _sfft.ifft(folded, axis=-1, norm="forward")
        prod_f = np.einsum("bdn,don->bon", dig_f, bsk._ek_fft[i])
        y = _sfft.fft(prod_f, axis=-1, norm="backward")
        _untwist_round_add_kernel(acc, y, tr.untwist, q)
    return acc


def blind_rotate(acc: RlweCiphertext, a2N, bsk: BootstrapKey) -> RlweCiphertext:
    arr = np.stack([acc.a, acc.b])[None, ...]
    out = blind_rotate_batch(arr, np.asarray(a2N, dtype=np.int64)[None, :], bsk)
    return RlweCiphertext(out[0, 0], out[0, 1], bsk.params.q)


def sample_extract_batch(acc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(B,2,N) accumulators -> LWE arrays (B,N), (B,) under the z key."""
    a = acc[:, 0, :]
    ea = np.concatenate([a[:, :1], -a[:, -1:0:-1]], axis=1)
    return ea, acc[:, 1, 0].copy()


def sample_extract(acc: RlweCiphertext) -> LweCiphertext:
    ea, eb = sample_extract_batch(np.stack([acc.a, acc.b])[None, ...])
    return LweCiphertext(ea[0], int(eb[0]), acc.q)


def key_switch_batch(A: np.ndarray, b: np.ndarray, ksk: KeySwitchKey,
                     params: FheParams) -> tuple[np.ndarray, np.ndarray]:
    """LWE under z (dim N) -> LWE under s (dim n), batched."""
    if A.shape[-1] != ksk.N:
        raise ParameterError("ciphertext dimension does not match key-switch key")
    g = GadgetParams(ksk.base, ksk.levels)
    digits = gadget_decompose(A, params.q, g)  # (B, levels, N)
    flat = np.swapaxes(digits, -2, -1).reshape(A.shape[0], ksk.N * ksk.levels)
    # float64 matmul is exact here: |digit| * q * N * levels << 2^52
    assert ksk.base // 2 * params.q * flat.shape[1] < (1 << 52)
    fA = flat.astype(np.float64)
    out_a = (-(fA @ ksk.A.astype(np.float64))).astype(np.int64) % params.q
    out_b = (np.asarray(b, dtype=np.int64) - (fA @ ksk.b.astype(np.float64)).astype(np.int64)) % params.q
    return out_a, out_b


def key_switch(ct: LweCiphertext, ksk: KeySwitchKey, params: FheParams) -> LweCiphertext:
    A, b = key_switch_batch(ct.a[None, :], np.asarray([ct.b]), ksk, params)
    return LweCiphertext(A[0], int(b[0]), params.q)


def bootstrap_batch(g: ProgramFunction, A: np.ndarray, b: np.ndarray,
                    bsk: BootstrapKey) -> tuple[np.ndarray, np.ndarray]:
    """Bootstrap a batch of LWE ciphertexts into LWE(g(m)) arrays."""
    params = bsk.params
    N, p = params.N, params.p
    twoN = 2 * N
    A = np.asarray(A, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    a2N = rescale(A, params.q, twoN)
    b2N = (rescale(b, params.q, twoN) + N // p) % twoN
    v = test_polynomial(g, params)
    acc_b = monomial_rotate_raw(v, (-b2N) % twoN, N) % params.q
    acc = np.stack([np.zeros_like(acc_b), acc_b], axis=1)  # (B, 2, N)
    acc = blind_rotate_batch(acc, a2N, bsk)
    ea, eb = sample_extract_batch(acc)
    out_a, out_b = key_switch_batch(ea, eb, bsk.ksk, params)
    bsk.bootstrap_count += len(out_b)
    return out_a, out_b


def bootstrap(g: ProgramFunction, ct: LweCiphertext, bsk: BootstrapKey) -> LweCiphertext:
    """LWE(m) -> LWE(g(m)) with fresh noise, same secret key."""
    A, b = bootstrap_batch(g, ct.a[None, :], np.asarray([ct.b]), bsk)
    return LweCiphertext(A[0], int(b[0]), bsk.params.q)
