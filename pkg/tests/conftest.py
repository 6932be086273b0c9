"""
Shared fixtures: the reference model, a phase-shifted variant, oracle solutions and the self-energy engine
"""
import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from model import load_model, reference_document  # noqa: E402
from oracle import solve_to_order  # noqa: E402
from scales import build_scale_sequence  # noqa: E402
from self_energy import SelfEnergyMatrix, build_catalog  # noqa: E402

N_MIN = -6


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: high-order enumerations taking tens of seconds")


def phase_document():
    """The reference model plus i/4 exp(i(a1 + a2 + 2b)) and its conjugate"""
    doc = reference_document()
    doc['name'] = 'phase'
    doc['terms'] = doc['terms'] + [{'nu': [1, 1], 'mu': [2], 're': 0, 'im': 0.25}]
    return doc


@pytest.fixture(scope="session")
def ref1():
    return load_model(reference_document())


@pytest.fixture(scope="session")
def phase_model():
    return load_model(phase_document())


@pytest.fixture(scope="session")
def solution(ref1):
    return solve_to_order(ref1, 4)


@pytest.fixture(scope="session")
def phase_solution(phase_model):
    return solve_to_order(phase_model, 4)


@pytest.fixture(scope="session")
def sequence(ref1):
    return build_scale_sequence(ref1.frequency, N_MIN)


@pytest.fixture(scope="session")
def catalog(ref1, sequence):
    return build_catalog(ref1, 2, N_MIN, sequence)


@pytest.fixture
def matrix(ref1, catalog, sequence):
    return SelfEnergyMatrix(ref1, catalog, sequence)


@pytest.fixture(scope="session")
def phase_matrix(phase_model):
    seq = build_scale_sequence(phase_model.frequency, N_MIN)
    return SelfEnergyMatrix(phase_model, build_catalog(phase_model, 2, N_MIN, seq), seq)
