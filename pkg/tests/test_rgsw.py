from dataclasses import replace

import numpy as np
import pytest

from fdsnn import rgsw, ring
from fdsnn.errors import DomainError


def small_ring(p=8):
    """Tiny ring parameters so exhaustive monomial checks stay fast."""
    from fdsnn.params import FheParams, GadgetParams

    return FheParams(n=4, q=1 << 12, N=64, p=p, sigma=1e-9,
                     gadget=GadgetParams(base=1 << 6, levels=2),
                     ks_base=8, ks_levels=4, sigma_bk=1e-9, sigma_ks=1e-9)


@pytest.fixture(scope="module")
def prm():
    return small_ring()


@pytest.fixture(scope="module")
def zk(prm):
    return rgsw.rlwe_keygen(prm, np.random.default_rng(0))


def msg_poly(coeffs, prm):
    arr = np.zeros(prm.N, dtype=np.int64)
    arr[:len(coeffs)] = coeffs
    return ring.NegacyclicPoly(arr % prm.p, prm.p)


class TestRlwe:
    def test_roundtrip_random(self, prm, zk):
        rng = np.random.default_rng(1)
        for _ in range(10):
            m = ring.NegacyclicPoly(rng.integers(0, prm.p, prm.N), prm.p)
            ct = rgsw.rlwe_encrypt(m, zk, prm, rng)
            dec = rgsw.rlwe_decrypt(ct, zk, prm)
            assert np.array_equal(dec.coeffs % prm.p, m.coeffs % prm.p)

    def test_zero_roundtrip(self, prm, zk):
        m = msg_poly([], prm)
        ct = rgsw.rlwe_encrypt(m, zk, prm, np.random.default_rng(2))
        assert not np.any(rgsw.rlwe_decrypt(ct, zk, prm).coeffs % prm.p)

    def test_homomorphic_add(self, prm, zk):
        rng = np.random.default_rng(3)
        m1 = ring.NegacyclicPoly(rng.integers(0, 2, prm.N), prm.p)
        m2 = ring.NegacyclicPoly(rng.integers(0, 2, prm.N), prm.p)
        c1 = rgsw.rlwe_encrypt(m1, zk, prm, rng)
        c2 = rgsw.rlwe_encrypt(m2, zk, prm, rng)
        dec = rgsw.rlwe_decrypt(c1 + c2, zk, prm)
        assert np.array_equal(dec.coeffs % prm.p,
                              (m1.coeffs + m2.coeffs) % prm.p)


class TestGadget:
    def test_zero_decomposes_to_zero(self, prm):
        digits = rgsw.gadget_decompose(np.zeros(8, dtype=np.int64), prm.q, prm.gadget)
        assert not np.any(digits)

    def test_recompose_identity(self, prm):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            x = rng.integers(0, prm.q, 16)
            digits = rgsw.gadget_decompose(x, prm.q, prm.gadget)
            back = rgsw.gadget_recompose(digits, prm.gadget) % prm.q
            assert np.array_equal(back, x)

    def test_digits_centered(self, prm):
        rng = np.random.default_rng(5)
        digits = rgsw.gadget_decompose(rng.integers(0, prm.q, 256), prm.q, prm.gadget)
        half = prm.gadget.base // 2
        assert digits.min() >= -half + 1 and digits.max() <= half

    def test_known_digit_pattern(self):
        from fdsnn.params import GadgetParams

        g = GadgetParams(base=16, levels=3)
        digits = rgsw.gadget_decompose(np.array([2048]), 1 << 12, g)
        assert [int(d) for d in digits.ravel()] == [0, 0, 8]


class TestExternalProduct:
    def test_identity_bit(self, prm, zk):
        rng = np.random.default_rng(6)
        m = ring.NegacyclicPoly(rng.integers(0, prm.p, prm.N), prm.p)
        ct = rgsw.rlwe_encrypt(m, zk, prm, rng)
        one = rgsw.rgsw_encrypt_bit(1, zk, prm, rng)
        out = rgsw.external_product(ct, one, prm)
        assert np.array_equal(rgsw.rlwe_decrypt(out, zk, prm).coeffs % prm.p,
                              m.coeffs % prm.p)

    def test_absorbing_bit(self, prm, zk):
        rng = np.random.default_rng(7)
        m = ring.NegacyclicPoly(rng.integers(0, prm.p, prm.N), prm.p)
        ct = rgsw.rlwe_encrypt(m, zk, prm, rng)
        zero = rgsw.rgsw_encrypt_bit(0, zk, prm, rng)
        out = rgsw.external_product(ct, zero, prm)
        assert not np.any(rgsw.rlwe_decrypt(out, zk, prm).coeffs % prm.p)

    def test_bad_bit_rejected(self, prm, zk):
        with pytest.raises(DomainError):
            rgsw.rgsw_encrypt_bit(2, zk, prm, np.random.default_rng(8))

    def test_monomial_shift(self, prm, zk):
        rng = np.random.default_rng(9)
        ct = rgsw.rlwe_encrypt(msg_poly([0, 0, 1], prm), zk, prm, rng)
        g3 = rgsw.rgsw_encrypt_monomial(3, zk, prm, rng)
        out = rgsw.rlwe_decrypt(rgsw.external_product(ct, g3, prm), zk, prm)
        want = np.zeros(prm.N, dtype=np.int64)
        want[5] = 1
        assert np.array_equal(out.coeffs % prm.p, want)

    def test_rotation_cancellation(self, prm, zk):
        rng = np.random.default_rng(10)
        for k in (1, 7, 63):
            ct = rgsw.rlwe_encrypt(
                ring.monomial_rotate(msg_poly([1], prm), k), zk, prm, rng)
            ginv = rgsw.rgsw_encrypt_monomial(2 * prm.N - k, zk, prm, rng)
            out = rgsw.rlwe_decrypt(rgsw.external_product(ct, ginv, prm), zk, prm)
            want = np.zeros(prm.N, dtype=np.int64)
            want[0] = 1
            assert np.array_equal(out.coeffs % prm.p, want)

    def test_exhaustive_monomial_pairs(self, prm, zk):
        rng = np.random.default_rng(11)
        gs = {k: rgsw.rgsw_encrypt_monomial(k, zk, prm, rng)
              for k in range(0, 2 * prm.N, 2 * prm.N // 16)}
        for j in range(0, 2 * prm.N, 2 * prm.N // 16):
            base = ring.monomial_rotate(msg_poly([1], prm), j)
            ct = rgsw.rlwe_encrypt(base, zk, prm, rng)
            for k, gk in gs.items():
                out = rgsw.rlwe_decrypt(rgsw.external_product(ct, gk, prm), zk, prm)
                want = ring.monomial_rotate(msg_poly([1], prm), j + k)
                assert np.array_equal(out.coeffs % prm.p, want.coeffs % prm.p), (j, k)

    def test_cmux_selects_branch(self, prm, zk):
        rng = np.random.default_rng(12)
        for bit in (0, 1):
            gb = rgsw.rgsw_encrypt_bit(bit, zk, prm, rng)
            c0 = rgsw.rlwe_encrypt(msg_poly([2], prm), zk, prm, rng)
            c1 = rgsw.rlwe_encrypt(msg_poly([3], prm), zk, prm, rng)
            diff = rgsw.RlweCiphertext((c1.a - c0.a) % prm.q,
                                       (c1.b - c0.b) % prm.q, prm.q)
            sel = rgsw.external_product(diff, gb, prm)
            dec = rgsw.rlwe_decrypt(c0 + sel, zk, prm)
            assert dec.coeffs[0] % prm.p == (3 if bit else 2)

    def test_noise_stays_bounded(self, prm, zk):
        rng = np.random.default_rng(13)
        g = prm.gadget
        predicted = (g.levels * prm.N * (g.base // 2) * 1  # key-noise term
                     + prm.q // (2 * g.base ** g.levels))  # remainder term
        m = msg_poly([1], prm)
        ct = rgsw.rlwe_encrypt(m, zk, prm, rng)
        one = rgsw.rgsw_encrypt_bit(1, zk, prm, rng)
        out = rgsw.external_product(ct, one, prm)
        phase = rgsw.rlwe_phase(out, zk, prm)
        err = ring.center((phase - prm.delta * m.coeffs) % prm.q, prm.q)
        assert np.abs(err).max() <= predicted
