"""Plaintext reference paths and dataset scans.

Three evaluation semantics live here: the float network (true LIF
dynamics including the 1/tau division), the integer network (bit-exact
twin of the encrypted path, with strict range checking), and the scans
that size the message modulus from data.  The encrypted path is correct
iff it agrees with `plain_infer`, which is what the test suite asserts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OverflowViolation, ParameterError, SerializationError
from .network import CsnnModel, DiscretizedNetwork, SpikingLayer, WeightLayer, \
    conv_matrix, pool_matrix, quantize_image
from .neuron import LifParams, plain_lif_step_batch


@dataclass
class Trace:
    """Everything observed during one plain_infer run.

    Per spiking layer: h/v/spike2 arrays of shape (T, cells).  Per weight
    layer: the integer input vector seen at each timestep (T, in_cells).
    """

    h: list = field(default_factory=list)
    v: list = field(default_factory=list)
    spike2: list = field(default_factory=list)
    weight_inputs: list = field(default_factory=list)

    def finalize(self):
        self.h = [np.stack(x) for x in self.h]
        self.v = [np.stack(x) for x in self.v]
        self.spike2 = [np.stack(x) for x in self.spike2]
        self.weight_inputs = [np.stack(x) for x in self.weight_inputs]
        return self


def plain_infer(net: DiscretizedNetwork, image, p: int | None = None,
                T: int | None = None) -> tuple[np.ndarray, Trace]:
    """Integer oracle with full trace; raises on range overflow when p is
    given (a failed run flags parameter misconfiguration, never wraps)."""
    T = net.T if T is None else T
    x0 = quantize_image(image, net.L).ravel()
    spiking = [l for l in net.layers if isinstance(l, SpikingLayer)]
    states = [np.zeros(int(np.prod(l.out_shape)), dtype=np.int64) for l in spiking]
    trace = Trace(h=[[] for _ in spiking], v=[[] for _ in spiking],
                  spike2=[[] for _ in spiking],
                  weight_inputs=[[] for l in net.layers if isinstance(l, WeightLayer)])
    scores = np.zeros(int(np.prod(net.layers[-1].out_shape)), dtype=np.int64)
    for t in range(T):
        x = x0
        si = wi = 0
        for layer in net.layers:
            if isinstance(layer, WeightLayer):
                trace.weight_inputs[wi].append(x)
                wi += 1
                x = layer.matrix @ x
            else:
                h = states[si] + x
                if p is not None:
                    lo, hi = layer.lif.v_th_hat - p // 2, p // 2
                    if np.any((h < lo) | (h >= hi)):
                        raise OverflowViolation(
                            f"charged potential outside [{lo}, {hi}) in spiking "
                            f"layer {si} at t={t}")
                x, states[si] = plain_lif_step_batch(states[si], x, layer.lif)
                trace.h[si].append(h)
                trace.v[si].append(states[si])
                trace.spike2[si].append(x)
                si += 1
        scores += x
    return scores, trace.finalize()


def float_infer(model: CsnnModel, image, T: int | None = None) -> np.ndarray:
    """Float reference: literal charge/fire/reset dynamics with the 1/tau
    leak; pixels are quantized to the model's L levels first so both
    reference paths see identical inputs."""
    T = model.T if T is None else T
    x0 = quantize_image(image, model.L).ravel() / model.L
    is_if = model.tau is None or model.tau == math.inf
    ops = []  # (kind, matrix) in arch order
    shape = tuple(model.input_shape)
    wi = 0
    for spec in model.arch:
        if spec["type"] == "conv2d":
            m, shape = conv_matrix(np.asarray(model.weights[wi], dtype=np.float64),
                                   shape, spec.get("stride", (1, 1)),
                                   spec.get("padding", (0, 0)))
            ops.append(("w", m))
            wi += 1
        elif spec["type"] == "avgpool":
            m, shape = pool_matrix(shape, spec["window"])
            ops.append(("w", m / int(np.prod(spec["window"]))))
        elif spec["type"] == "linear":
            ops.append(("w", np.asarray(model.weights[wi], dtype=np.float64)))
            wi += 1
            shape = (spec["out_features"],)
        else:
            ops.append(("s", int(np.prod(shape))))
    states = [np.zeros(c) for k, c in ops if k == "s"]
    scores = np.zeros(int(np.prod(shape)))
    for t in range(T):
        x = x0
        si = 0
        for kind, op in ops:
            if kind == "w":
                x = op @ x
            else:
                v = states[si]
                h = v + x if is_if else v + (-v + x) / model.tau
                fired = h >= model.v_th
                states[si] = np.where(fired | (h <= 0), 0.0, h)
                x = fired.astype(np.float64)
                si += 1
        scores += x
    return scores


def classify_scores(scores) -> int:
    return int(np.argmax(scores))


def accuracy_eval(net_or_model, images, labels, T: int | None = None) -> float:
    """Classification accuracy of either reference path over a dataset."""
    hits = 0
    for img, lab in zip(images, labels):
        if isinstance(net_or_model, DiscretizedNetwork):
            scores, _ = plain_infer(net_or_model, img, T=T)
        else:
            scores = float_infer(net_or_model, img, T=T)
        hits += classify_scores(scores) == int(lab)
    return hits / len(labels)


# ---------------------------------------------------------------------------
# statistics scans (message-modulus sizing)
# ---------------------------------------------------------------------------

@dataclass
class LayerStats:
    """Dataset maxima that size p: per spiking layer the float-scale
    threshold-plus-input bound, per weight layer the max absolute weight
    row sum."""

    spiking_max: list[float]
    weight_l1: list[float]
    samples: int

    def to_dict(self) -> dict:
        return {"spiking_max": list(map(float, self.spiking_max)),
                "weight_l1": list(map(float, self.weight_l1)),
                "samples": self.samples}

    @classmethod
    def from_dict(cls, doc: dict) -> "LayerStats":
        try:
            return cls(list(doc["spiking_max"]), list(doc["weight_l1"]),
                       int(doc["samples"]))
        except (KeyError, TypeError) as e:
            raise SerializationError(f"bad stats document: {e}") from e


def noise_amplification(net: DiscretizedNetwork) -> float:
    """Worst absolute row sum of the composite integer operator between
    consecutive bootstrap stages (pooling composes with the next layer)."""
    worst, comp = 0.0, None
    for layer in net.layers:
        if isinstance(layer, WeightLayer):
            comp = layer.matrix if comp is None else layer.matrix @ comp
        elif comp is not None:
            worst = max(worst, float(np.abs(comp).sum(axis=1).max()))
            comp = None
    if comp is not None:
        worst = max(worst, float(np.abs(comp).sum(axis=1).max()))
    return worst


def scan_weight_l1(net_or_model) -> list[float]:
    if isinstance(net_or_model, DiscretizedNetwork):
        return [float(l.weight_l1_max) for l in net_or_model.layers
                if isinstance(l, WeightLayer)]
    model = net_or_model
    out = []
    shape = tuple(model.input_shape)
    wi = 0
    for spec in model.arch:
        if spec["type"] == "conv2d":
            m, shape = conv_matrix(np.asarray(model.weights[wi], dtype=np.float64),
                                   shape, spec.get("stride", (1, 1)),
                                   spec.get("padding", (0, 0)))
            out.append(float(np.abs(m).sum(axis=1).max()))
            wi += 1
        elif spec["type"] == "avgpool":
            wh, ww = spec["window"]
            shape = (shape[0], shape[1] // wh, shape[2] // ww)
            out.append(1.0)  # mean pool: n unit weights / n
        elif spec["type"] == "linear":
            out.append(float(np.abs(model.weights[wi]).sum(axis=1).max()))
            wi += 1
            shape = (spec["out_features"],)
    return out


def scan_layer_max(net_or_model, images, T: int | None = None) -> LayerStats:
    """Max over the dataset of (threshold + |input|) per spiking layer,
    expressed at float scale so select_p can apply any theta."""
    images = list(images)
    if isinstance(net_or_model, DiscretizedNetwork):
        net = net_or_model
        theta = net.theta
        n_spiking = len(net.spiking_sizes)
        peaks = np.zeros(n_spiking)
        for img in images:
            _, tr = plain_infer(net, img, T=T)
            si = 0
            for layer in net.layers:
                if isinstance(layer, SpikingLayer):
                    # h = v_prev + i; recover the input peak from the trace
                    prev_v = np.vstack([np.zeros_like(tr.v[si][0]), tr.v[si][:-1]])
                    i_abs = np.abs(tr.h[si] - prev_v).max()
                    peaks[si] = max(peaks[si],
                                    (layer.lif.v_th_hat + i_abs) / theta)
                    si += 1
        return LayerStats(peaks.tolist(), scan_weight_l1(net), len(images))
    model = net_or_model
    # float path: track V_th + max |I| per spiking layer
    T_eff = model.T if T is None else T
    n_spiking = sum(1 for s in model.arch if s["type"] == "spiking")
    peaks = np.zeros(n_spiking)
    for img in images:
        peaks = np.maximum(peaks, _float_input_peaks(model, img, T_eff))
    return LayerStats((model.v_th + peaks).tolist(), scan_weight_l1(model),
                      len(images))


def _float_input_peaks(model: CsnnModel, image, T: int) -> np.ndarray:
    x0 = quantize_image(image, model.L).ravel() / model.L
    is_if = model.tau is None or model.tau == math.inf
    shape = tuple(model.input_shape)
    ops = []
    wi = 0
    for spec in model.arch:
        if spec["type"] == "conv2d":
            m, shape = conv_matrix(np.asarray(model.weights[wi], dtype=np.float64),
                                   shape, spec.get("stride", (1, 1)),
                                   spec.get("padding", (0, 0)))
            ops.append(("w", m))
            wi += 1
        elif spec["type"] == "avgpool":
            m, shape = pool_matrix(shape, spec["window"])
            ops.append(("w", m / int(np.prod(spec["window"]))))
        elif spec["type"] == "linear":
            ops.append(("w", np.asarray(model.weights[wi], dtype=np.float64)))
            wi += 1
            shape = (spec["out_features"],)
        else:
            ops.append(("s", int(np.prod(shape))))
    states = [np.zeros(c) for k, c in ops if k == "s"]
    peaks = np.zeros(len(states))
    for t in range(T):
        x = x0
        si = 0
        for kind, op in ops:
            if kind == "w":
                x = op @ x
            else:
                peaks[si] = max(peaks[si], np.abs(x).max())
                v = states[si]
                h = v + x if is_if else v + (-v + x) / model.tau
                fired = h >= model.v_th
                states[si] = np.where(fired | (h <= 0), 0.0, h)
                x = fired.astype(np.float64)
                si += 1
    return peaks


def check_discretization_bound(net: DiscretizedNetwork, trace: Trace) -> float:
    """Largest observed |I_hat - scale*I| / (0.5 * sum|x|) over weight
    layers; the discretization guarantee is that this never exceeds 1."""
    worst = 0.0
    wi = 0
    for layer in net.layers:
        if not isinstance(layer, WeightLayer):
            continue
        xs = trace.weight_inputs[wi]
        wi += 1
        if layer.float_matrix is None:
            continue
        for x in xs:
            gap = np.abs(layer.matrix @ x - layer.scale * (layer.float_matrix @ x))
            denom = 0.5 * np.abs(x).sum()
            if denom > 0:
                worst = max(worst, float(gap.max() / denom))
            elif gap.max() > 0:
                raise AssertionError("nonzero gap on zero input")
    return worst


def poisson_encode(image, T: int, rng: np.random.Generator) -> np.ndarray:
    """T binary frames; pixel with level v in [0, 255] spikes iff v exceeds
    a fresh uniform draw, giving empirical rate v/256."""
    levels = np.asarray(np.round(np.asarray(image, dtype=np.float64) * 255),
                        dtype=np.int64)
    draws = rng.integers(0, 256, size=(T, *levels.shape))
    return (levels[None, ...] > draws).astype(np.int64)


def bootstrap_count(net: DiscretizedNetwork, T: int, mode: str = "csnn") -> int:
    """Predicted bootstraps: 2 per spiking neuron per step.  In the Poisson
    baseline the first spiking stage is replaced by the input encoder, which
    costs one bootstrap per input cell per step (a homomorphic comparison)."""
    if mode == "csnn":
        return net.bootstrap_count(T)
    if mode == "poisson-snn":
        first = net.layers[0]
        in_cells = first.matrix.shape[1] if isinstance(first, WeightLayer) else 0
        later = sum(net.spiking_sizes[1:])
        return (in_cells + 2 * later) * T
    raise ParameterError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# dataset I/O: IDX containers and PGM images
# ---------------------------------------------------------------------------

def read_idx(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4 or raw[0] or raw[1]:
        raise SerializationError("not an IDX file")
    dtype = {0x08: np.uint8, 0x09: np.int8, 0x0B: ">i2", 0x0C: ">i4",
             0x0D: ">f4", 0x0E: ">f8"}.get(raw[2])
    if dtype is None:
        raise SerializationError(f"unknown IDX element type {raw[2]:#x}")
    ndim = raw[3]
    dims = np.frombuffer(raw, ">u4", count=ndim, offset=4)
    data = np.frombuffer(raw, dtype, offset=4 + 4 * ndim)
    if data.size != int(np.prod(dims)):
        raise SerializationError("IDX payload size mismatch")
    return data.reshape(dims).astype(np.int64 if raw[2] <= 0x0C else np.float64)


def write_idx(path, array: np.ndarray) -> None:
    array = np.asarray(array)
    code = {np.uint8: 0x08, np.int8: 0x09}.get(array.dtype.type, 0x0C)
    out = bytearray([0, 0, code, array.ndim])
    for d in array.shape:
        out += int(d).to_bytes(4, "big")
    if code == 0x08:
        out += array.astype(np.uint8).tobytes()
    else:
        out += array.astype(">i4").tobytes()
    with open(path, "wb") as f:
        f.write(bytes(out))


def read_pgm(path) -> np.ndarray:
    """P2/P5 grayscale image, returned as floats in [0, 1]."""
    with open(path, "rb") as f:
        raw = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if raw[i:i + 1].isspace():
            i += 1
        elif raw[i:i + 1] == b"#":
            i = raw.index(b"\n", i) + 1
        else:
            j = i
            while j < len(raw) and not raw[j:j + 1].isspace():
                j += 1
            tokens.append(raw[i:j])
            i = j
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        data = np.frombuffer(raw, np.uint8 if maxval < 256 else ">u2",
                             count=w * h, offset=i + 1)
    elif magic == b"P2":
        data = np.array(raw[i:].split()[:w * h], dtype=np.int64)
    else:
        raise SerializationError(f"unsupported PGM magic {magic!r}")
    return data.reshape(h, w).astype(np.float64) / maxval


def load_dataset(path, limit: int | None = None, split: str = "test"):
    """(images in [0,1], labels) from a directory holding IDX files
    (images*.idx / labels*.idx) or PGM files named <label>_*.pgm.

    With both train and test IDX pairs present, `split` picks which pair
    by filename substring."""
    import glob
    import os

    idx_imgs = sorted(glob.glob(os.path.join(path, "*images*idx*")))
    chosen = [p for p in idx_imgs if split in os.path.basename(p)]
    if chosen:
        idx_imgs = chosen
    if idx_imgs:
        labels_files = sorted(glob.glob(os.path.join(path, "*labels*idx*")))
        chosen = [p for p in labels_files if split in os.path.basename(p)]
        if chosen:
            labels_files = chosen
        if not labels_files:
            raise SerializationError(f"no labels IDX next to {idx_imgs[0]}")
        images = read_idx(idx_imgs[0]).astype(np.float64) / 255.0
        labels = read_idx(labels_files[0])
        if limit:
            images, labels = images[:limit], labels[:limit]
        return images, labels
    pgms = sorted(glob.glob(os.path.join(path, "*.pgm")))
    if not pgms:
        raise SerializationError(f"no IDX or PGM data found under {path}")
    if limit:
        pgms = pgms[:limit]
    images = np.stack([read_pgm(p) for p in pgms])
    labels = np.array([int(os.path.basename(p).split("_")[0]) for p in pgms])
    return images, labels
