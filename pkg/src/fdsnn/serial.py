"""Binary containers for keys, ciphertexts, and scores.

Layout: magic ``FDSN``, format version (u16 LE), a kind tag, the
parameter digest, then named little-endian int64 arrays with explicit
shapes.  Files are bit-identical across platforms and every reader
checks the digest against the parameters it was given.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time

import numpy as np

from .bootstrap import BootstrapKey, KeySwitchKey
from .errors import SerializationError
from .lwe import LweSecretKey
from .network import CiphertextTensor
from .params import FheParams
from .rgsw import RgswCiphertext, RlweSecretKey

MAGIC = b"FDSN"
VERSION = 1

KIND_SECRET_KEY = b"SK"
KIND_BOOTSTRAP_KEY = b"BK"
KIND_CIPHERTEXTS = b"CT"


def _write_array(f, name: str, arr: np.ndarray) -> None:
    tag = name.encode()
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    f.write(struct.pack("<B", len(tag)))
    f.write(tag)
    f.write(struct.pack("<B", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
    f.write(arr.astype("<i8").tobytes())


def _read_exact(f, count: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise SerializationError("truncated container")
    return data


def _read_array(f):
    tag_len = f.read(1)
    if not tag_len:
        return None, None
    tag = _read_exact(f, tag_len[0]).decode()
    ndim = struct.unpack("<B", _read_exact(f, 1))[0]
    shape = struct.unpack(f"<{ndim}q", _read_exact(f, 8 * ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(_read_exact(f, 8 * count), "<i8").reshape(shape)
    return tag, data.astype(np.int64)


def _write_header(f, kind: bytes, params: FheParams) -> None:
    f.write(MAGIC)
    f.write(struct.pack("<H", VERSION))
    f.write(kind)
    digest = bytes.fromhex(params.digest())
    f.write(struct.pack("<B", len(digest)))
    f.write(digest)


def _read_header(f, expected_kind: bytes, params: FheParams | None):
    if f.read(4) != MAGIC:
        raise SerializationError("not an FDSN container")
    version = struct.unpack("<H", f.read(2))[0]
    if version != VERSION:
        raise SerializationError(f"unsupported container version {version}")
    kind = f.read(2)
    if kind != expected_kind:
        raise SerializationError(
            f"container holds {kind!r}, expected {expected_kind!r}")
    digest = f.read(f.read(1)[0]).hex()
    if params is not None and digest != params.digest():
        raise SerializationError("parameter digest mismatch")
    return digest


def _arrays(f) -> dict:
    out = {}
    while True:
        tag, arr = _read_array(f)
        if tag is None:
            return out
        out[tag] = arr


def save_secret_key(path, sk: LweSecretKey, zk: RlweSecretKey,
                    params: FheParams) -> None:
    with open(path, "wb") as f:
        _write_header(f, KIND_SECRET_KEY, params)
        _write_array(f, "s", sk.s)
        _write_array(f, "z", zk.z)


def load_secret_key(path, params: FheParams) -> tuple[LweSecretKey, RlweSecretKey]:
    with open(path, "rb") as f:
        _read_header(f, KIND_SECRET_KEY, params)
        arrs = _arrays(f)
    return LweSecretKey(arrs["s"]), RlweSecretKey(arrs["z"])


def save_bootstrap_key(path, bsk: BootstrapKey) -> None:
    params = bsk.params
    with open(path, "wb") as f:
        _write_header(f, KIND_BOOTSTRAP_KEY, params)
        _write_array(f, "ek_a", np.stack([e.rows_a for e in bsk.ek]))
        _write_array(f, "ek_b", np.stack([e.rows_b for e in bsk.ek]))
        _write_array(f, "ksk_A", bsk.ksk.A)
        _write_array(f, "ksk_b", bsk.ksk.b)


def load_bootstrap_key(path, params: FheParams) -> BootstrapKey:
    with open(path, "rb") as f:
        _read_header(f, KIND_BOOTSTRAP_KEY, params)
        arrs = _arrays(f)
    ek = [RgswCiphertext(a, b, params.q, params.gadget)
          for a, b in zip(arrs["ek_a"], arrs["ek_b"])]
    ksk = KeySwitchKey(arrs["ksk_A"], arrs["ksk_b"], params.ks_base,
                       params.ks_levels, params.N)
    return BootstrapKey(ek, ksk, params)


def save_ciphertexts(path, ct: CiphertextTensor, params: FheParams) -> None:
    with open(path, "wb") as f:
        _write_header(f, KIND_CIPHERTEXTS, params)
        _write_array(f, "shape", np.asarray(ct.shape))
        _write_array(f, "A", ct.A)
        _write_array(f, "b", ct.b)


def load_ciphertexts(path, params: FheParams) -> CiphertextTensor:
    with open(path, "rb") as f:
        _read_header(f, KIND_CIPHERTEXTS, params)
        arrs = _arrays(f)
    return CiphertextTensor(tuple(int(d) for d in arrs["shape"]),
                            arrs["A"], arrs["b"], params.q)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, params: FheParams, files: dict) -> None:
    """files: name -> path; records each file's content digest."""
    doc = {
        "params": params.to_dict(),
        "params_digest": params.digest(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "files": {name: {"path": str(p), "sha256": file_digest(p)}
                  for name, p in files.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)


def check_manifest(path) -> dict:
    """Verify every recorded digest; returns the manifest document."""
    with open(path) as f:
        doc = json.load(f)
    try:
        entries = doc["files"].items()
    except (KeyError, AttributeError) as e:
        raise SerializationError(f"malformed manifest: {e}") from e
    for name, entry in entries:
        if file_digest(entry["path"]) != entry["sha256"]:
            raise SerializationError(f"digest mismatch for {name} "
                                     f"({entry['path']})")
    return doc
