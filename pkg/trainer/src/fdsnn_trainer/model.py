"""The spiking CNN in PyTorch with surrogate-gradient activations.

Forward dynamics mirror the inference engine's float reference exactly:
charge h = v + (i - v)/tau (or v + i for IF), fire at v_th, reset to zero
on fire or on nonpositive potential.  The spike step function is
non-differentiable, so the backward pass substitutes one of four
standard surrogate derivative curves.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn


def surrogate_grad(kind: str, a: float):
    """Derivative substitute evaluated at (h - v_th)."""
    if kind == "f1":
        return lambda x: (x.abs() < a / 2).float() / a
    if kind == "f2":
        sq = math.sqrt(a)
        return lambda x: ((sq / 2 - a / 4 * x.abs())
                          * (x.abs() < 2 / sq).float()).clamp(min=0)
    if kind == "f3":
        return lambda x: torch.sigmoid(x / a) * (1 - torch.sigmoid(x / a)) / a
    if kind == "f4":
        return lambda x: torch.exp(-x * x / (2 * a)) / math.sqrt(2 * math.pi * a)
    raise ValueError(f"unknown surrogate {kind!r}")


class _SpikeFn(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, grad_fn):
        ctx.save_for_backward(x)
        ctx.grad_fn = grad_fn
        return (x >= 0).float()

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        return grad_out * ctx.grad_fn(x), None


class SpikingCsnn(nn.Module):
    """28x28 -> conv 8x8/2 pad 1 (10 maps) -> LIF -> pool 2 -> 360-160 ->
    LIF -> 160-10 -> LIF; bias-free throughout."""

    def __init__(self, tau: float = math.inf, v_th: float = 1.0, T: int = 2,
                 L: int = 1, surrogate: str = "f3", a: float = 1.0):
        super().__init__()
        self.tau = tau
        self.v_th = v_th
        self.T = T
        self.L = L
        self.surrogate = surrogate
        self.a = a
        self._grad_fn = surrogate_grad(surrogate, a)
        self.conv = nn.Conv2d(1, 10, 8, stride=2, padding=1, bias=False)
        self.pool = nn.AvgPool2d(2)
        self.fc1 = nn.Linear(360, 160, bias=False)
        self.fc2 = nn.Linear(160, 10, bias=False)

    def _lif(self, i, v):
        if math.isinf(self.tau):
            h = v + i
        else:
            h = v + (i - v) / self.tau
        s = _SpikeFn.apply(h - self.v_th, self._grad_fn)
        v_next = torch.where((h >= self.v_th) | (h <= 0), torch.zeros_like(h), h)
        return s, v_next

    def forward(self, x):
        """x: (B, 1, 28, 28) in [0, 1]; returns firing rates (B, 10)."""
        x = torch.round(x * self.L) / self.L
        b = x.shape[0]
        v1 = torch.zeros(b, 10, 12, 12, device=x.device)
        v2 = torch.zeros(b, 160, device=x.device)
        v3 = torch.zeros(b, 10, device=x.device)
        rates = torch.zeros(b, 10, device=x.device)
        for _ in range(self.T):
            s1, v1 = self._lif(self.conv(x), v1)
            s2, v2 = self._lif(self.fc1(self.pool(s1).flatten(1)), v2)
            s3, v3 = self._lif(self.fc2(s2), v3)
            rates = rates + s3
        return rates / self.T
