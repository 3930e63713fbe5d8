import os
from dataclasses import replace

import numpy as np
import pytest

from fdsnn import bootstrap, lwe, params, rgsw

HERE = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(HERE, os.pardir, "data")
MODEL_PATH = os.path.join(HERE, "fixtures", "model_if_t2.json")


@pytest.fixture(scope="session")
def toy():
    return params.preset("TOY")


@pytest.fixture(scope="session")
def toy_keys(toy):
    rng = np.random.default_rng(1)
    sk = lwe.lwe_keygen(toy, rng)
    zk = rgsw.rlwe_keygen(toy, rng)
    bsk = bootstrap.gen_bootstrap_key(sk, zk, toy, rng)
    return sk, zk, bsk


@pytest.fixture(scope="session")
def toy64():
    """TOY shape with a wider message space and tighter fresh noise, so
    neuron-level integer ranges fit and sums of fresh noises stay in budget."""
    return replace(params.preset("TOY"), p=64, sigma=2.0, preset_name="custom")


@pytest.fixture(scope="session")
def toy64_keys(toy64):
    rng = np.random.default_rng(2)
    sk = lwe.lwe_keygen(toy64, rng)
    zk = rgsw.rlwe_keygen(toy64, rng)
    bsk = bootstrap.gen_bootstrap_key(sk, zk, toy64, rng)
    return sk, zk, bsk
