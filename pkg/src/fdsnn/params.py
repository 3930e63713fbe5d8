"""Parameter presets, message-space selection, and the noise budget check.

The presets are engineering choices: the moduli are powers of two, the
LWE mask components are sampled on the q/(2N) grid so that the modulus
switch before blind rotation is exact, and the bootstrap/key-switch
component noise is kept below the integer rounding threshold.  Security
levels are nominal targets, not proven claims; TOY is insecure by design
and exists for exhaustive correctness sweeps.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace, asdict

from .errors import ConfigurationError, ParameterError
from .ring import is_power_of_two


@dataclass(frozen=True)
class GadgetParams:
    """Signed digit decomposition: base power of two, `levels` digits."""

    base: int
    levels: int

    def __post_init__(self):
        if not is_power_of_two(self.base) or self.base < 2:
            raise ParameterError("gadget base must be a power of two >= 2")
        if self.levels < 1:
            raise ParameterError("gadget levels must be >= 1")


@dataclass(frozen=True)
class FheParams:
    """Everything that governs correctness and noise for one key universe.

    sigma is the fresh-encryption noise parameter; sigma_bk / sigma_ks
    are the bootstrap-key and key-switch-key noise parameters.  At these
    small moduli the component noise must stay far below q/(2p) after a
    ~theta * sum|w| blowup, so the presets keep sigma_bk/sigma_ks under
    the rounding threshold of the discrete Gaussian sampler.
    """

    n: int
    q: int
    N: int
    p: int
    sigma: float
    gadget: GadgetParams
    ks_base: int
    ks_levels: int
    sigma_bk: float
    sigma_ks: float
    preset_name: str = "custom"

    def __post_init__(self):
        for name in ("q", "N", "p"):
            if not is_power_of_two(getattr(self, name)):
                raise ParameterError(f"{name} must be a power of two")
        if self.p % 2 != 0:
            raise ParameterError("p must be even")
        if self.p > 2 * self.N:
            raise ParameterError("p must not exceed 2N (one test-vector slot per message)")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if self.gadget.base ** self.gadget.levels < self.q:
            raise ParameterError("gadget must cover q exactly (base**levels >= q)")
        if self.ks_base ** self.ks_levels < self.q:
            raise ParameterError("key-switch gadget must cover q (base**levels >= q)")

    @property
    def grid(self) -> int:
        """Spacing of LWE mask components; q/(2N), 1 when q <= 2N."""
        return max(1, self.q // (2 * self.N))

    @property
    def delta(self) -> int:
        """Message scale q/p."""
        return self.q // self.p

    @property
    def noise_bound(self) -> int:
        """Decryption is correct for |noise| strictly below q/(2p)."""
        return self.q // (2 * self.p)

    def with_p(self, p: int) -> "FheParams":
        return replace(self, p=p)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @staticmethod
    def from_dict(d: dict) -> "FheParams":
        d = dict(d)
        d["gadget"] = GadgetParams(**d["gadget"])
        return FheParams(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_PRESETS = {
    # Insecure; sized so exhaustive-message bootstrap sweeps run fast.
    "TOY": FheParams(
        n=32, q=1 << 12, N=512, p=8, sigma=8.0,
        gadget=GadgetParams(base=1 << 6, levels=2),
        ks_base=1 << 3, ks_levels=4,
        sigma_bk=1.0 / 64, sigma_ks=1.0 / 64,
        preset_name="TOY",
    ),
    # Desk-scale operating point for the fixture network.
    "DESK": FheParams(
        n=512, q=1 << 25, N=1024, p=2048, sigma=2.0,
        gadget=GadgetParams(base=1 << 13, levels=2),
        ks_base=1 << 5, ks_levels=5,
        sigma_bk=1.0 / 64, sigma_ks=1.0 / 64,
        preset_name="DESK",
    ),
    # 128-bit-class shape (nominal target, not analyzed).
    "LARGE": FheParams(
        n=1024, q=1 << 27, N=2048, p=4096, sigma=2.0,
        gadget=GadgetParams(base=1 << 10, levels=3),
        ks_base=1 << 5, ks_levels=6,
        sigma_bk=1.0 / 64, sigma_ks=1.0 / 64,
        preset_name="LARGE",
    ),
}

MAX_RING_DEGREE = max(p.N for p in _PRESETS.values())


def preset(name: str) -> FheParams:
    try:
        return _PRESETS[name.upper()]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}")


def select_p(theta: int, layer_max: float, *, safety_margin: bool = False,
             min_p: int = 8, max_ring_degree: int = MAX_RING_DEGREE) -> int:
    """Smallest power-of-two message modulus p with p/2 >= ceil(theta * layer_max).

    `layer_max` is the largest V_th + max_t|I[t]| over spiking layers
    (float-network units).  With `safety_margin` the requirement is
    doubled.  Raises when even the largest ring degree cannot host p.
    """
    if layer_max < 0:
        raise ParameterError("layer_max must be nonnegative")
    need = math.ceil(theta * layer_max)
    if safety_margin:
        need *= 2
    p = min_p
    while p // 2 < need:
        p *= 2
    if p > 2 * max_ring_degree:
        raise ConfigurationError(
            f"required p={p} exceeds 2N for every preset (max 2N={2 * max_ring_degree})"
        )
    return p


@dataclass(frozen=True)
class BudgetReport:
    passed: bool
    margin: float
    l1_bound: float
    l2_bound: float
    noise_cap: int


def noise_budget_check(params: FheParams, theta: int, weight_l1: float,
                       boot_noise: float, *, margin_factor: float = 1.0) -> BudgetReport:
    """Worst-case L1 noise check for one WeightSum between bootstraps.

    Passes iff boot_noise * theta * weight_l1 * margin_factor < q/(2p).
    `boot_noise` is the measured fresh bound out of bootstrapping;
    `weight_l1` is max over cells of sum|w_j| in float-network units, so
    theta * weight_l1 approximates sum|w_hat_j|.  Reports the (looser)
    statistical L2 figure alongside.
    """
    cap = params.noise_bound
    l1 = boot_noise * theta * weight_l1
    l2 = boot_noise * math.sqrt(theta * weight_l1) if weight_l1 > 0 else 0.0
    if l1 <= 0:
        return BudgetReport(True, math.inf, l1, l2, cap)
    margin = cap / (l1 * margin_factor)
    return BudgetReport(margin > 1.0, margin, l1, l2, cap)
