"""Produce the committed fixture model for the heavy test criteria.

Two stages: normal surrogate-gradient training, then quantization-aware
fine-tuning with every weight constrained (straight-through rounding) to
the integer grid the engine uses at theta=40 — conv at scale 40, fc1 at
40/(2*4) = 5 (spike amplitude 2, 2x2 pool fold), fc2 at 40/2 = 20.  The
exported weights are then exactly representable, so the integer network
classifies like the float network and the desk-scale encrypted runs
exercise realistic, non-degenerate dynamics.

Run from the repository root:  python tools/make_fixture_model.py
"""

import json
import os
import sys

import numpy as np
import torch
from torch.nn.utils import parametrize

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir))

from fdsnn_trainer import TrainConfig, evaluate, export, load_split, train

THETA = 40
SCALES = {"conv": THETA, "fc1": THETA / 8, "fc2": THETA / 2}
OUT = os.path.join(os.path.dirname(__file__), os.pardir,
                   "tests", "fixtures", "model_if_t2.json")
DATA = os.path.join(os.path.dirname(__file__), os.pardir, "data")


class RoundToGrid(torch.nn.Module):
    """w -> round(w * s) / s with a straight-through gradient."""

    def __init__(self, scale: float):
        super().__init__()
        self.scale = scale

    def forward(self, w):
        q = torch.round(w * self.scale) / self.scale
        return w + (q - w).detach()


def main():
    config = TrainConfig(epochs=100, lr=3e-3, seed=0)
    net, report = train(config, DATA)
    print(f"stage 1 (float): train {report.train_accuracy:.4f} "
          f"test {report.test_accuracy:.4f}")

    for name, scale in SCALES.items():
        parametrize.register_parametrization(getattr(net, name), "weight",
                                             RoundToGrid(scale))

    x_tr, y_tr = load_split(DATA, "train")
    x_te, y_te = load_split(DATA, "test")
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    onehot = torch.eye(10)
    gen = torch.Generator().manual_seed(1)
    for epoch in range(40):
        net.train()
        order = torch.randperm(len(x_tr), generator=gen)
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            loss = torch.mean((net(x_tr[idx]) - onehot[y_tr[idx]]) ** 2)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        if epoch % 5 == 4 or epoch == 0:
            print(f"stage 2 epoch {epoch + 1}: loss {total / len(order):.5f} "
                  f"test {evaluate(net, x_te, y_te):.4f}")

    for name in SCALES:
        parametrize.remove_parametrizations(getattr(net, name), "weight",
                                            leave_parametrized=True)
    acc = evaluate(net, x_te, y_te)
    print(f"stage 2 (quantized grid): test {acc:.4f}")
    doc = export(net, OUT)
    # torch stores float32, where e.g. 1/5 is not exact; snap the exported
    # float64 weights onto the grid so the file is exactly representable
    for i, scale in enumerate(SCALES.values()):
        w = np.asarray(doc["weights"][i])
        snapped = np.round(w * scale) / scale
        assert np.abs(snapped - w).max() < 1e-6
        doc["weights"][i] = snapped.tolist()
    with open(OUT, "w") as f:
        json.dump(doc, f)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
