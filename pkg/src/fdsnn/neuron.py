"""Discretized leaky integrate-and-fire neurons, plaintext and encrypted.

The discretized update works on integers only: Ĥ = V̂ + Î, a spike (valued
2) fires when Ĥ reaches the integer threshold, and the reset keeps
round(λ·Ĥ) when no spike fired and the potential is positive.  The
encrypted step computes the same three lines with one ciphertext addition
and two bootstraps (fire and reset), so state noise is refreshed every
timestep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bootstrap import BootstrapKey, ProgramFunction, bootstrap_batch, make_program
from .errors import OverflowViolation, ParameterError
from .lwe import LweCiphertext, add_plain_batch
from .params import FheParams
from .ring import div_round_half_away


@dataclass(frozen=True)
class LifParams:
    """Integer neuron parameters at discretization scale theta.

    tau is the leak time constant (int >= 2) or math.inf for the
    integrate-and-fire mode.  The leak ratio lambda = leak_num/leak_den
    defaults to (tau-1)/tau; the alternative (theta-1)/theta reading is
    selectable via leak_convention="theta".
    """

    tau: float
    theta: int
    v_th: float = 1.0
    v_reset: float = 0.0
    leak_convention: str = "tau"

    def __post_init__(self):
        if self.tau != math.inf and (int(self.tau) != self.tau or self.tau < 2):
            raise ParameterError("tau must be an integer >= 2 or math.inf")
        if self.theta < 1:
            raise ParameterError("theta must be a positive integer")
        if self.v_reset != 0.0:
            raise ParameterError("only v_reset = 0 is supported")
        if self.leak_convention not in ("tau", "theta"):
            raise ParameterError("leak_convention must be 'tau' or 'theta'")

    @property
    def is_if(self) -> bool:
        return self.tau == math.inf

    @property
    def v_th_hat(self) -> int:
        if self.is_if:
            return round(self.theta * self.v_th)
        return round(self.theta * self.tau * self.v_th)

    @property
    def leak_num(self) -> int:
        if self.is_if:
            return 1
        k = self.theta if self.leak_convention == "theta" else int(self.tau)
        return k - 1

    @property
    def leak_den(self) -> int:
        if self.is_if:
            return 1
        return self.theta if self.leak_convention == "theta" else int(self.tau)


@dataclass(frozen=True)
class PlainLifState:
    v_hat: int = 0


@dataclass(frozen=True)
class CipherLifState:
    v_ct: LweCiphertext


def _leak(h: int, lif: LifParams) -> int:
    return div_round_half_away(h * lif.leak_num, lif.leak_den)


def plain_lif_step(state: PlainLifState, i_hat: int, lif: LifParams,
                   p: int | None = None) -> tuple[int, PlainLifState]:
    """One exact integer neuron update; the oracle for the encrypted path.

    When `p` is given the charged potential is checked against the range
    the encrypted evaluation can represent, and a violation is an error.
    """
    h = state.v_hat + int(i_hat)
    if p is not None and not (lif.v_th_hat - p // 2 <= h < p // 2):
        raise OverflowViolation(
            f"charged potential {h} outside [{lif.v_th_hat - p // 2}, {p // 2})")
    if h >= lif.v_th_hat:
        return 2, PlainLifState(0)
    if h <= 0:
        return 0, PlainLifState(0)
    return 0, PlainLifState(_leak(h, lif))


def plain_lif_step_batch(v_hat: np.ndarray, i_hat: np.ndarray, lif: LifParams,
                         p: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized plain_lif_step over arrays of independent neurons."""
    h = np.asarray(v_hat, dtype=np.int64) + np.asarray(i_hat, dtype=np.int64)
    if p is not None:
        bad = (h < lif.v_th_hat - p // 2) | (h >= p // 2)
        if np.any(bad):
            raise OverflowViolation(
                f"charged potential outside representable range: {h[bad][:8]}")
    fired = h >= lif.v_th_hat
    leaked = div_round_half_away(h * lif.leak_num, lif.leak_den)
    v_next = np.where(fired | (h <= 0), 0, leaked)
    return np.where(fired, 2, 0).astype(np.int64), v_next.astype(np.int64)


def g_fire(p: int) -> ProgramFunction:
    """Sign table: +1 on [0, p/2), -1 below."""
    return make_program(lambda m: 1, p)


def g_reset(lif: LifParams, p: int) -> ProgramFunction:
    """Reset table on the charged potential: 0 at/above threshold or at/below
    zero, round(lambda * m) in between; negative half fixed by antisymmetry."""
    vth = lif.v_th_hat
    if vth >= p // 2:
        raise ParameterError("integer threshold must be below p/2")
    return make_program(lambda m: 0 if m >= vth else _leak(m, lif), p)


def fhe_fire_batch(hA: np.ndarray, hb: np.ndarray, lif: LifParams,
                   bsk: BootstrapKey) -> tuple[np.ndarray, np.ndarray]:
    """Spike-valued ciphertexts (0 or 2) from charged-potential ciphertexts."""
    params = bsk.params
    hb_shift = add_plain_batch(hb, -lif.v_th_hat, params)
    oA, ob = bootstrap_batch(g_fire(params.p), hA, hb_shift, bsk)
    return oA, add_plain_batch(ob, 1, params)


def fhe_reset_batch(hA: np.ndarray, hb: np.ndarray, lif: LifParams,
                    bsk: BootstrapKey) -> tuple[np.ndarray, np.ndarray]:
    return bootstrap_batch(g_reset(lif, bsk.params.p), hA, hb, bsk)


def fhe_fire(h_ct: LweCiphertext, lif: LifParams, bsk: BootstrapKey) -> LweCiphertext:
    A, b = fhe_fire_batch(h_ct.a[None, :], np.asarray([h_ct.b]), lif, bsk)
    return LweCiphertext(A[0], int(b[0]), bsk.params.q)


def fhe_reset(h_ct: LweCiphertext, lif: LifParams, bsk: BootstrapKey) -> LweCiphertext:
    A, b = fhe_reset_batch(h_ct.a[None, :], np.asarray([h_ct.b]), lif, bsk)
    return LweCiphertext(A[0], int(b[0]), bsk.params.q)


def fhe_lif_step_batch(vA: np.ndarray, vb: np.ndarray, iA: np.ndarray,
                       ib: np.ndarray, lif: LifParams, bsk: BootstrapKey):
    """One encrypted timestep for a batch of neurons.

    Returns (spike2_A, spike2_b, v_next_A, v_next_b); exactly two
    bootstraps per neuron.
    """
    q = bsk.params.q
    hA = (vA + iA) % q
    hb = (vb + ib) % q
    sA, sb = fhe_fire_batch(hA, hb, lif, bsk)
    nA, nb = fhe_reset_batch(hA, hb, lif, bsk)
    return sA, sb, nA, nb


def fhe_lif_step(state: CipherLifState, i_ct: LweCiphertext, lif: LifParams,
                 bsk: BootstrapKey) -> tuple[LweCiphertext, CipherLifState]:
    q = bsk.params.q
    sA, sb, nA, nb = fhe_lif_step_batch(
        state.v_ct.a[None, :], np.asarray([state.v_ct.b]),
        i_ct.a[None, :], np.asarray([i_ct.b]), lif, bsk)
    return (LweCiphertext(sA[0], int(sb[0]), q),
            CipherLifState(LweCiphertext(nA[0], int(nb[0]), q)))
