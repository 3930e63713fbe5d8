"""Convolutional spiking network: float description, integer discretization,
and encrypted forward inference.

Every conv / pool / linear layer is lowered once to a dense integer matrix
over flattened cells, so the encrypted path, the integer oracle, and the
rounding-bound checks all share the same linear operator.  Pooling is a
unit-weight sum; its divisor is folded into the scale of the next weight
layer, which keeps the ciphertext path division-free.

Scale bookkeeping: pixels are quantized to [0, L]; spike ciphertexts carry
the value 2*S; a pool window of n cells multiplies the carried scale by n.
A weight layer discretizes its float weights at theta / (carried scale),
so the input to every spiking layer sits at scale theta ("scale
invariance").
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapKey
from .errors import ConfigurationError, ParameterError, SerializationError
from .lwe import LweCiphertext, LweSecretKey, encrypt_batch
from .neuron import LifParams, fhe_lif_step_batch
from .params import FheParams
from .ring import round_half_away

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

MODEL_FORMAT = "fdsnn-model/1"

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "input_shape", "T", "L", "tau", "v_th", "arch", "weights"],
    "properties": {
        "format": {"const": MODEL_FORMAT},
        "input_shape": {"type": "array", "items": {"type": "integer", "minimum": 1},
                        "minItems": 3, "maxItems": 3},
        "T": {"type": "integer", "minimum": 1},
        "L": {"type": "integer", "minimum": 1},
        "tau": {"type": ["integer", "null"], "minimum": 2},
        "v_th": {"type": "number", "exclusiveMinimum": 0},
        "arch": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["type"],
                "properties": {
                    "type": {"enum": ["conv2d", "avgpool", "linear", "spiking"]},
                    "out_channels": {"type": "integer", "minimum": 1},
                    "kernel": {"type": "array", "items": {"type": "integer", "minimum": 1},
                               "minItems": 2, "maxItems": 2},
                    "stride": {"type": "array", "items": {"type": "integer", "minimum": 1},
                               "minItems": 2, "maxItems": 2},
                    "padding": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                "minItems": 2, "maxItems": 2},
                    "window": {"type": "array", "items": {"type": "integer", "minimum": 1},
                               "minItems": 2, "maxItems": 2},
                    "out_features": {"type": "integer", "minimum": 1},
                },
            },
        },
        "weights": {"type": "array",
                    "items": {"type": "array", "items": {"type": "number"}}},
    },
}


@dataclass(frozen=True)
class CsnnModel:
    """Float network description plus the weights, as trained."""

    arch: tuple
    weights: tuple  # float arrays, one per conv/linear layer in order
    input_shape: tuple = (1, 28, 28)
    T: int = 2
    L: int = 1
    tau: float = 2
    v_th: float = 1.0

    def __post_init__(self):
        self.shape_chain()  # validates consistency

    def lif_params(self, theta: int) -> LifParams:
        tau = math.inf if self.tau is None or self.tau == math.inf else int(self.tau)
        return LifParams(tau=tau, theta=theta, v_th=self.v_th)

    def shape_chain(self) -> list[tuple]:
        """Shape after each arch entry; raises on inconsistency."""
        shape = tuple(self.input_shape)
        chain = []
        wi = 0
        for spec in self.arch:
            kind = spec["type"]
            if kind == "conv2d":
                c, h, w = shape
                kh, kw = spec["kernel"]
                sh, sw = spec.get("stride", (1, 1))
                ph, pw = spec.get("padding", (0, 0))
                oc = spec["out_channels"]
                oh = (h + 2 * ph - kh) // sh + 1
                ow = (w + 2 * pw - kw) // sw + 1
                if oh < 1 or ow < 1:
                    raise ParameterError(f"conv output collapses: {spec} on {shape}")
                wt = self.weights[wi]
                if tuple(np.shape(wt)) != (oc, c, kh, kw):
                    raise ParameterError(
                        f"conv weights {np.shape(wt)} != {(oc, c, kh, kw)}")
                wi += 1
                shape = (oc, oh, ow)
            elif kind == "avgpool":
                c, h, w = shape
                wh, ww = spec["window"]
                if h % wh or w % ww:
                    raise ParameterError("pool window does not tile the input")
                shape = (c, h // wh, w // ww)
            elif kind == "linear":
                out = spec["out_features"]
                inn = int(np.prod(shape))
                wt = self.weights[wi]
                if tuple(np.shape(wt)) != (out, inn):
                    raise ParameterError(
                        f"linear weights {np.shape(wt)} != {(out, inn)}")
                wi += 1
                shape = (out,)
            elif kind == "spiking":
                chain.append(shape)
                continue
            else:
                raise ParameterError(f"unknown layer type {kind!r}")
            chain.append(shape)
        if wi != len(self.weights):
            raise ParameterError("weight array count does not match arch")
        return chain

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "input_shape": list(self.input_shape),
            "T": self.T,
            "L": self.L,
            "tau": None if (self.tau is None or self.tau == math.inf) else int(self.tau),
            "v_th": self.v_th,
            "arch": [dict(a) for a in self.arch],
            "weights": [np.asarray(w, dtype=np.float64).ravel().tolist()
                        for w in self.weights],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CsnnModel":
        if jsonschema is not None:
            try:
                jsonschema.validate(doc, MODEL_SCHEMA)
            except jsonschema.ValidationError as e:
                raise SerializationError(f"model file rejected: {e.message}") from e
        elif doc.get("format") != MODEL_FORMAT:  # pragma: no cover
            raise SerializationError(f"unsupported model format {doc.get('format')!r}")
        arch = tuple(doc["arch"])
        flat = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        # reshape flat row-major arrays by walking the shape chain
        shapes = []
        shape = tuple(doc["input_shape"])
        for spec in arch:
            if spec["type"] == "conv2d":
                c = shape[0]
                shapes.append((spec["out_channels"], c, *spec["kernel"]))
                sh, sw = spec.get("stride", (1, 1))
                ph, pw = spec.get("padding", (0, 0))
                kh, kw = spec["kernel"]
                shape = (spec["out_channels"],
                         (shape[1] + 2 * ph - kh) // sh + 1,
                         (shape[2] + 2 * pw - kw) // sw + 1)
            elif spec["type"] == "avgpool":
                wh, ww = spec["window"]
                shape = (shape[0], shape[1] // wh, shape[2] // ww)
            elif spec["type"] == "linear":
                shapes.append((spec["out_features"], int(np.prod(shape))))
                shape = (spec["out_features"],)
        if len(flat) != len(shapes):
            raise SerializationError("weight array count does not match arch")
        weights = []
        for arr, s in zip(flat, shapes):
            if arr.size != int(np.prod(s)):
                raise SerializationError(
                    f"weight array of size {arr.size} cannot fill shape {s}")
            weights.append(arr.reshape(s))
        tau = doc["tau"]
        return cls(arch=arch, weights=tuple(weights),
                   input_shape=tuple(doc["input_shape"]), T=doc["T"], L=doc["L"],
                   tau=math.inf if tau is None else tau, v_th=doc["v_th"])

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "CsnnModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def reference_architecture(weights=None, rng=None, tau=2, T=2, L=1) -> CsnnModel:
    """The fixed MNIST topology: 28x28 (pad 1) -> 8x8 conv stride 2, 10 maps
    -> spiking -> 2x2 pool -> 360-160 linear -> spiking -> 160-10 linear
    -> spiking.  Random weights are drawn when none are given (tests)."""
    arch = (
        {"type": "conv2d", "out_channels": 10, "kernel": [8, 8],
         "stride": [2, 2], "padding": [1, 1]},
        {"type": "spiking"},
        {"type": "avgpool", "window": [2, 2]},
        {"type": "linear", "out_features": 160},
        {"type": "spiking"},
        {"type": "linear", "out_features": 10},
        {"type": "spiking"},
    )
    if weights is None:
        rng = rng or np.random.default_rng(0)
        weights = (rng.normal(0, 0.1, (10, 1, 8, 8)),
                   rng.normal(0, 0.05, (160, 360)),
                   rng.normal(0, 0.05, (10, 160)))
    return CsnnModel(arch=arch, weights=tuple(weights), T=T, L=L, tau=tau)


# ---------------------------------------------------------------------------
# lowering to dense matrices
# ---------------------------------------------------------------------------

def conv_matrix(weights: np.ndarray, in_shape, stride, padding):
    """Dense (out_cells, in_cells) operator for a zero-padded conv."""
    oc, ic, kh, kw = weights.shape
    c, h, w = in_shape
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    mat = np.zeros((oc * oh * ow, c * h * w), dtype=weights.dtype)
    for o in range(oc):
        for y in range(oh):
            for x in range(ow):
                row = (o * oh + y) * ow + x
                for cc in range(ic):
                    for dy in range(kh):
                        iy = y * sh + dy - ph
                        if not 0 <= iy < h:
                            continue
                        ix0 = x * sw - pw
                        for dx in range(kw):
                            ix = ix0 + dx
                            if 0 <= ix < w:
                                mat[row, (cc * h + iy) * w + ix] = weights[o, cc, dy, dx]
    return mat, (oc, oh, ow)


def pool_matrix(in_shape, window):
    """Unit-weight summation over non-overlapping windows."""
    c, h, w = in_shape
    wh, ww = window
    oh, ow = h // wh, w // ww
    mat = np.zeros((c * oh * ow, c * h * w), dtype=np.int64)
    for cc in range(c):
        for y in range(oh):
            for x in range(ow):
                row = (cc * oh + y) * ow + x
                for dy in range(wh):
                    for dx in range(ww):
                        mat[row, (cc * h + y * wh + dy) * w + x * ww + dx] = 1
    return mat, (c, oh, ow)


@dataclass(frozen=True)
class WeightLayer:
    """A lowered conv/pool/linear: out = matrix @ flattened cells."""

    kind: str
    matrix: np.ndarray  # int64 (out_cells, in_cells)
    float_matrix: np.ndarray | None  # pre-discretization operator, same shape
    scale: float  # discretization scale applied to the float weights
    out_shape: tuple

    @property
    def weight_l1_max(self) -> int:
        return int(np.abs(self.matrix).sum(axis=1).max())


@dataclass(frozen=True)
class SpikingLayer:
    lif: LifParams
    out_shape: tuple


@dataclass(frozen=True)
class DiscretizedNetwork:
    """Integer network: shared semantics for the oracle and the FHE path."""

    layers: tuple
    theta: int
    L: int
    lif: LifParams
    T: int

    @property
    def spiking_sizes(self) -> list[int]:
        return [int(np.prod(l.out_shape)) for l in self.layers
                if isinstance(l, SpikingLayer)]

    def bootstrap_count(self, T: int | None = None) -> int:
        return 2 * sum(self.spiking_sizes) * (self.T if T is None else T)


def discretize(model: CsnnModel, theta: int, L: int | None = None) -> DiscretizedNetwork:
    """Lower a float model to integer layers at discretization scale theta."""
    if theta < 1:
        raise ParameterError("theta must be a positive integer")
    L = model.L if L is None else L
    lif = model.lif_params(theta)
    layers = []
    shape = tuple(model.input_shape)
    carry = L  # scale already carried by the integer inputs of the next layer
    wi = 0
    for spec in model.arch:
        kind = spec["type"]
        if kind in ("conv2d", "linear"):
            scale = theta / carry
            if scale < 1:
                warnings.warn(
                    f"weight scale {scale:.3g} < 1 collapses precision "
                    f"(theta={theta}, carried scale {carry})")
            if kind == "conv2d":
                fmat, out_shape = conv_matrix(
                    np.asarray(model.weights[wi], dtype=np.float64), shape,
                    spec.get("stride", (1, 1)), spec.get("padding", (0, 0)))
            else:
                fmat = np.asarray(model.weights[wi], dtype=np.float64)
                out_shape = (spec["out_features"],)
                if fmat.shape[1] != int(np.prod(shape)):
                    raise ParameterError("linear layer input size mismatch")
            mat = np.asarray(round_half_away(fmat * scale), dtype=np.int64)
            layers.append(WeightLayer(kind, mat, fmat, scale, out_shape))
            wi += 1
            shape = out_shape
            carry = theta  # value now sits at scale theta (pre-activation)
        elif kind == "avgpool":
            mat, out_shape = pool_matrix(shape, spec["window"])
            layers.append(WeightLayer("avgpool", mat, None, 1.0, out_shape))
            n = int(np.prod(spec["window"]))
            carry *= n
            shape = out_shape
        elif kind == "spiking":
            layers.append(SpikingLayer(lif, shape))
            carry = 2  # spike ciphertexts carry 2*S
        else:
            raise ParameterError(f"unknown layer type {kind!r}")
    return DiscretizedNetwork(tuple(layers), theta, L, lif, model.T)


# ---------------------------------------------------------------------------
# encrypted evaluation
# ---------------------------------------------------------------------------

@dataclass
class CiphertextTensor:
    """Row-major LWE ciphertexts: mask rows A (count, n), bodies b (count,)."""

    shape: tuple
    A: np.ndarray
    b: np.ndarray
    q: int

    def __post_init__(self):
        if len(self.b) != int(np.prod(self.shape)) or len(self.A) != len(self.b):
            raise ParameterError("cell count does not match tensor shape")

    @property
    def count(self) -> int:
        return len(self.b)

    def cell(self, i: int) -> LweCiphertext:
        return LweCiphertext(self.A[i], int(self.b[i]), self.q)


def quantize_image(pixels: np.ndarray, L: int) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.min() < 0 or pixels.max() > 1:
        raise ParameterError("pixels must lie in [0, 1]")
    return np.asarray(round_half_away(pixels * L), dtype=np.int64)


def encrypt_image(pixels, L: int, sk: LweSecretKey, params: FheParams,
                  rng: np.random.Generator) -> CiphertextTensor:
    """Quantize pixels to integer level [0, L] and encrypt cell-wise."""
    quant = quantize_image(pixels, L)
    A, b = encrypt_batch(quant.ravel(), sk, params, rng)
    shape = quant.shape if quant.ndim == 3 else (1, *quant.shape)
    return CiphertextTensor(tuple(shape), A, b, params.q)


def layer_forward(x: CiphertextTensor, layer: WeightLayer,
                  params: FheParams) -> CiphertextTensor:
    """Weighted sums of ciphertexts: one matrix product over all cells."""
    if layer.matrix.shape[1] != x.count:
        raise ParameterError(
            f"layer expects {layer.matrix.shape[1]} cells, got {x.count}")
    m = layer.matrix
    # float64 products are exact well below 2^53
    assert np.abs(m).max() * params.q * m.shape[1] < (1 << 52)
    mf = m.astype(np.float64)
    A = (mf @ x.A.astype(np.float64)).astype(np.int64) % params.q
    b = (mf @ x.b.astype(np.float64)).astype(np.int64) % params.q
    return CiphertextTensor(layer.out_shape, A, b, params.q)


def zero_states(count: int, params: FheParams) -> CiphertextTensor:
    """Trivial noiseless encryptions of 0 for initial membrane potentials."""
    return CiphertextTensor((count,), np.zeros((count, params.n), dtype=np.int64),
                            np.zeros(count, dtype=np.int64), params.q)


def spiking_forward(x: CiphertextTensor, states: CiphertextTensor, lif: LifParams,
                    bsk: BootstrapKey, workers: int = 1):
    """Parallel map of the encrypted neuron step; 2 bootstraps per cell."""
    sA, sb, nA, nb = _lif_step_chunked(states.A, states.b, x.A, x.b, lif, bsk, workers)
    q = bsk.params.q
    return (CiphertextTensor(x.shape, sA, sb, q),
            CiphertextTensor(states.shape, nA, nb, q))


def _lif_step_chunked(vA, vb, iA, ib, lif, bsk, workers):
    if workers <= 1 or len(vb) < 2 * workers:
        return fhe_lif_step_batch(vA, vb, iA, ib, lif, bsk)
    from concurrent.futures import ThreadPoolExecutor

    bounds = np.linspace(0, len(vb), workers + 1).astype(int)
    chunks = [(vA[a:z], vb[a:z], iA[a:z], ib[a:z]) for a, z in zip(bounds, bounds[1:])]
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(
            lambda c: fhe_lif_step_batch(c[0], c[1], c[2], c[3], lif, bsk), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


@dataclass
class InferStats:
    bootstrap_count: int = 0
    wall_time: float = 0.0
    timesteps: int = 0


def infer(enc_image: CiphertextTensor, net: DiscretizedNetwork, bsk: BootstrapKey,
          T: int | None = None, workers: int = 1,
          observer=None) -> tuple[CiphertextTensor, InferStats]:
    """Encrypted forward pass over T timesteps; scores accumulate the final
    spiking layer's spike ciphertexts (values 2*S).

    `observer(layer_index, t, spikes: CiphertextTensor)` is called after
    each spiking layer when given (test instrumentation).
    """
    params = bsk.params
    T = net.T if T is None else T
    if T < 1:
        raise ParameterError("T must be >= 1")
    t0 = time.monotonic()
    boots0 = bsk.bootstrap_count
    states = [zero_states(int(np.prod(l.out_shape)), params)
              for l in net.layers if isinstance(l, SpikingLayer)]
    out_cells = int(np.prod(net.layers[-1].out_shape))
    scores = zero_states(out_cells, params)
    for t in range(T):
        x = enc_image
        si = 0
        for li, layer in enumerate(net.layers):
            if isinstance(layer, WeightLayer):
                x = layer_forward(x, layer, params)
            else:
                x, states[si] = spiking_forward(x, states[si], layer.lif, bsk, workers)
                if observer is not None:
                    observer(li, t, x)
                si += 1
        scores = CiphertextTensor(scores.shape, (scores.A + x.A) % params.q,
                                  (scores.b + x.b) % params.q, params.q)
    return scores, InferStats(bsk.bootstrap_count - boots0, time.monotonic() - t0, T)


def classify(score_cts: CiphertextTensor, sk: LweSecretKey, params: FheParams) -> int:
    """Decrypt the 10 scores and return the argmax (ties: lowest index)."""
    from .lwe import decrypt_batch

    scores = decrypt_batch(score_cts.A, score_cts.b, sk, params)
    return int(np.argmax(scores))
