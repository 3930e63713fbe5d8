"""Encrypted inference for discretized convolutional spiking networks.

The pipeline: discretize a float CSNN to integers, encrypt the image
cell-wise as LWE ciphertexts, evaluate conv/pool/linear layers as
homomorphic weighted sums, and compute each neuron's fire and reset
nonlinearities with programmable bootstrapping, refreshing noise every
timestep.  `oracle` holds the exact plaintext twins used to verify the
whole encrypted path bit for bit.
"""

from .errors import (
    ConfigurationError,
    DomainError,
    FdsnnError,
    OverflowViolation,
    ParameterError,
    SerializationError,
)
from .params import FheParams, GadgetParams, noise_budget_check, preset, select_p
from .lwe import LweCiphertext, LweSecretKey, decrypt, encrypt, weight_sum
from .bootstrap import (
    BootstrapKey,
    ProgramFunction,
    gen_bootstrap_key,
    make_program,
)
from .neuron import CipherLifState, LifParams, PlainLifState, fhe_lif_step, plain_lif_step
from .network import (
    CiphertextTensor,
    CsnnModel,
    DiscretizedNetwork,
    classify,
    discretize,
    encrypt_image,
    infer,
    reference_architecture,
)
from .oracle import LayerStats, float_infer, plain_infer, scan_layer_max, scan_weight_l1

# keep the submodule names importable as attributes despite same-named
# re-exports above
from . import bootstrap, cli, lwe, network, neuron, oracle, params, rgsw, ring, serial  # noqa: E402

__version__ = "1.0.0"
