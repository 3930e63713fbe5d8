import json

import numpy as np
import pytest

from fdsnn import lwe, network, serial
from fdsnn.errors import SerializationError


class TestSecretKey:
    def test_roundtrip(self, toy, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        path = tmp_path / "sk.bin"
        serial.save_secret_key(path, sk, zk, toy)
        sk2, zk2 = serial.load_secret_key(path, toy)
        assert np.array_equal(sk.s, sk2.s)
        assert np.array_equal(zk.z, zk2.z)

    def test_wrong_params_rejected(self, toy, toy64, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        path = tmp_path / "sk.bin"
        serial.save_secret_key(path, sk, zk, toy)
        with pytest.raises(SerializationError):
            serial.load_secret_key(path, toy64)

    def test_truncated_file_rejected(self, toy, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        path = tmp_path / "sk.bin"
        serial.save_secret_key(path, sk, zk, toy)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(SerializationError):
            serial.load_secret_key(path, toy)

    def test_bad_magic_rejected(self, toy, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        path = tmp_path / "sk.bin"
        serial.save_secret_key(path, sk, zk, toy)
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(SerializationError):
            serial.load_secret_key(path, toy)


class TestBootstrapKey:
    def test_roundtrip_bit_identical_behaviour(self, toy, toy_keys, tmp_path):
        from fdsnn import bootstrap, neuron

        sk, _, bsk = toy_keys
        path = tmp_path / "bk.bin"
        serial.save_bootstrap_key(path, bsk)
        bsk2 = serial.load_bootstrap_key(path, toy)
        rng = np.random.default_rng(0)
        g = neuron.g_fire(toy.p)
        for m in (-3, 0, 2):
            ct = lwe.encrypt(m, sk, toy, rng)
            o1 = bootstrap.bootstrap(g, ct, bsk)
            o2 = bootstrap.bootstrap(g, ct, bsk2)
            assert np.array_equal(o1.a, o2.a) and o1.b == o2.b

    def test_file_roundtrip_stable(self, toy, toy_keys, tmp_path):
        _, _, bsk = toy_keys
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        serial.save_bootstrap_key(p1, bsk)
        serial.save_bootstrap_key(p2, serial.load_bootstrap_key(p1, toy))
        assert p1.read_bytes() == p2.read_bytes()


class TestCiphertexts:
    def test_roundtrip(self, toy, toy_keys, tmp_path):
        sk, _, _ = toy_keys
        rng = np.random.default_rng(1)
        img = rng.random((4, 4))
        ct = network.encrypt_image(img, 1, sk, toy, rng)
        path = tmp_path / "ct.bin"
        serial.save_ciphertexts(path, ct, toy)
        ct2 = serial.load_ciphertexts(path, toy)
        assert ct2.shape == ct.shape
        assert np.array_equal(ct.A, ct2.A) and np.array_equal(ct.b, ct2.b)


class TestManifest:
    def test_written_digests_verify(self, toy, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        key_path = tmp_path / "sk.bin"
        serial.save_secret_key(key_path, sk, zk, toy)
        man = tmp_path / "manifest.json"
        serial.write_manifest(man, toy, {"sk.bin": key_path})
        assert serial.check_manifest(man)

    def test_tampered_file_detected(self, toy, toy_keys, tmp_path):
        sk, zk, _ = toy_keys
        key_path = tmp_path / "sk.bin"
        serial.save_secret_key(key_path, sk, zk, toy)
        man = tmp_path / "manifest.json"
        serial.write_manifest(man, toy, {"sk.bin": key_path})
        data = bytearray(key_path.read_bytes())
        data[-1] ^= 1
        key_path.write_bytes(bytes(data))
        with pytest.raises(SerializationError):
            serial.check_manifest(man)
