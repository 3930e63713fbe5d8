"""Training loop and model-file export.

MSE loss on firing rates against one-hot targets, Adam, state reset per
batch (the membrane state tensors are created fresh inside forward).
The exported file is the versioned "fdsnn-model/1" JSON the inference
engine consumes; this package touches the engine only through that file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .model import SpikingCsnn

MODEL_FORMAT = "fdsnn-model/1"


@dataclass
class TrainConfig:
    tau: float = math.inf  # math.inf selects the integrate-and-fire mode
    T: int = 2
    L: int = 1
    v_th: float = 1.0
    surrogate: str = "f3"
    a: float = 1.0
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    train_limit: int | None = None
    test_limit: int | None = None


@dataclass
class TrainReport:
    train_accuracy: float
    test_accuracy: float
    epochs_run: int
    losses: list = field(default_factory=list)


def read_idx(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[0] or raw[1] or raw[2] != 0x08:
        raise ValueError(f"{path} is not an unsigned-byte IDX file")
    ndim = raw[3]
    dims = np.frombuffer(raw, ">u4", count=ndim, offset=4)
    return np.frombuffer(raw, np.uint8, offset=4 + 4 * ndim).reshape(dims)


def load_split(data_dir: str, split: str):
    imgs = read_idx(os.path.join(data_dir, f"{split}-images.idx3-ubyte"))
    labels = read_idx(os.path.join(data_dir, f"{split}-labels.idx1-ubyte"))
    x = torch.from_numpy(imgs.astype(np.float32) / 255.0).unsqueeze(1)
    y = torch.from_numpy(labels.astype(np.int64))
    return x, y


def evaluate(net: SpikingCsnn, x: torch.Tensor, y: torch.Tensor,
             batch_size: int = 256) -> float:
    net.eval()
    hits = 0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            rates = net(x[i:i + batch_size])
            hits += (rates.argmax(1) == y[i:i + batch_size]).sum().item()
    return hits / len(y)


def train(config: TrainConfig, data_dir: str) -> tuple[SpikingCsnn, TrainReport]:
    torch.manual_seed(config.seed)
    np.random.seed(config.seed)
    x_tr, y_tr = load_split(data_dir, "train")
    x_te, y_te = load_split(data_dir, "test")
    if config.train_limit:
        x_tr, y_tr = x_tr[:config.train_limit], y_tr[:config.train_limit]
    if config.test_limit:
        x_te, y_te = x_te[:config.test_limit], y_te[:config.test_limit]

    net = SpikingCsnn(tau=config.tau, v_th=config.v_th, T=config.T,
                      L=config.L, surrogate=config.surrogate, a=config.a)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    onehot = torch.eye(10)
    losses = []
    gen = torch.Generator().manual_seed(config.seed)
    for epoch in range(config.epochs):
        net.train()
        order = torch.randperm(len(x_tr), generator=gen)
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            rates = net(x_tr[idx])
            loss = torch.mean((rates - onehot[y_tr[idx]]) ** 2)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / len(order))
        if not math.isfinite(losses[-1]):
            raise RuntimeError(f"training diverged at epoch {epoch}: "
                               f"loss {losses[-1]}")
    report = TrainReport(evaluate(net, x_tr, y_tr), evaluate(net, x_te, y_te),
                         config.epochs, losses)
    return net, report


def export(net: SpikingCsnn, path: str) -> dict:
    """Write the versioned model JSON consumed by the inference engine."""
    doc = {
        "format": MODEL_FORMAT,
        "input_shape": [1, 28, 28],
        "T": net.T,
        "L": net.L,
        "tau": None if math.isinf(net.tau) else int(net.tau),
        "v_th": net.v_th,
        "arch": [
            {"type": "conv2d", "out_channels": 10, "kernel": [8, 8],
             "stride": [2, 2], "padding": [1, 1]},
            {"type": "spiking"},
            {"type": "avgpool", "window": [2, 2]},
            {"type": "linear", "out_features": 160},
            {"type": "spiking"},
            {"type": "linear", "out_features": 10},
            {"type": "spiking"},
        ],
        "weights": [
            net.conv.weight.detach().double().numpy().ravel().tolist(),
            net.fc1.weight.detach().double().numpy().ravel().tolist(),
            net.fc2.weight.detach().double().numpy().ravel().tolist(),
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f)
    return doc
