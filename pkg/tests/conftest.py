import logging
import math
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np
import pytest

from dephase_lab.fock import build_pure_state
from dephase_lab.linop import validate_unitary

ALPHA_TOY = math.sqrt(2 / 3)
BETA_TOY = math.sqrt(1 / 3)
SAMPLE_DIR = Path(__file__).resolve().parent.parent / 'sample-inputs'


def toy_states(alpha, beta):
    plus = build_pure_state(2, [((2, 0), alpha), ((1, 1), beta)])
    minus = build_pure_state(2, [((2, 0), alpha), ((1, 1), -beta)])
    return plus, minus


def patterns_with(n_modes, n_photons):
    return [tuple(c.count(j) for j in range(n_modes))
            for c in combinations_with_replacement(range(n_modes), n_photons)]


def random_state(rng, n_modes, photon_numbers):
    """Normalized complex-Gaussian superposition over every pattern with the given totals."""
    patterns = [p for n in photon_numbers for p in patterns_with(n_modes, n)]
    amps = rng.standard_normal(len(patterns)) + 1j * rng.standard_normal(len(patterns))
    amps /= np.linalg.norm(amps)
    return build_pure_state(n_modes, zip(patterns, amps))


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


@pytest.fixture
def toy_pair():
    return toy_states(ALPHA_TOY, BETA_TOY)


@pytest.fixture
def orthogonal_pair():
    return toy_states(1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture
def hadamard():
    root = 1 / math.sqrt(2)
    return validate_unitary([[root, root], [root, -root]])


@pytest.fixture
def identity2():
    return validate_unitary(np.eye(2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def sample_dir():
    return SAMPLE_DIR
