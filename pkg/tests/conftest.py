# conftest.py
import copy
import json

import numpy as np
import pytest

from core import DecoherenceParams, SpectralHamiltonian, pure_state

# ─── Reference Two-Level System ─────────────────────────────────────────────
REFERENCE_CONFIG = {
    "hbar": 1.0,
    "tau1": 0.1,
    "tau2": 0.1,
    "hamiltonian": {"eigenvalues": [0.0, 1.0]},
    "initial_state": {"pure_vector": [1.0, 1.0]},
    "times": {"start": 0.0, "stop": 2.0, "count": 21},
    "observables": [
        {"name": "sx", "matrix": {"re": [[0.0, 1.0], [1.0, 0.0]]}},
        {"name": "energy", "matrix": {"re": [[0.0, 0.0], [0.0, 1.0]]}},
    ],
    "track_elements": [[0, 1], [1, 1]],
    "seed": 20240601,
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return DecoherenceParams(tau1=0.1, tau2=0.1)


@pytest.fixture
def two_level():
    """Levels 0 and 1 with an equal superposition: |rho_01(0)| = 0.5."""
    return SpectralHamiltonian.from_eigenvalues([0.0, 1.0]), pure_state([1.0, 1.0])


@pytest.fixture
def reference_doc():
    return copy.deepcopy(REFERENCE_CONFIG)


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    return write
