"""Pytest configuration and shared fixtures for maxent-certify tests."""

import json

import numpy as np
import pytest

from src.core.hermitian import PAULI_X, PAULI_Y, PAULI_Z
from src.core.moments import ConstraintSet


def operator_dict(matrix, name=None):
    """Matrix in the file format: separate real and imaginary arrays."""
    matrix = np.asarray(matrix, dtype=complex)
    entry = {"real": np.real(matrix).tolist(), "imag": np.imag(matrix).tolist()}
    if name is not None:
        entry["name"] = name
    return entry


def problem_dict(observables, moments, options=None):
    """Problem file content for a list of (name, matrix) pairs."""
    dim = np.asarray(observables[0][1]).shape[0]
    content = {
        "dim": dim,
        "observables": [operator_dict(matrix, name) for name, matrix in observables],
        "target_moments": list(moments),
    }
    if options is not None:
        content["options"] = options
    return content


@pytest.fixture
def rng():
    """Seeded random generator.

    Returns:
        numpy.random.Generator: Generator with seed 1234
    """
    return np.random.default_rng(1234)


@pytest.fixture
def pauli():
    """Pauli matrices as HermitianOperators.

    Returns:
        dict: Name -> HermitianOperator
    """
    return {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


@pytest.fixture
def qubit_z():
    """Single-observable constraint set X = (sigma_z)."""
    return ConstraintSet([PAULI_Z], names=["Z"])


@pytest.fixture
def qubit_bloch():
    """Constraint set X = (sigma_z, sigma_x, sigma_y) whose moment body is the Bloch ball."""
    return ConstraintSet([PAULI_Z, PAULI_X, PAULI_Y], names=["Z", "X", "Y"])


@pytest.fixture
def write_json(tmp_path):
    """Write JSON content to a file under tmp_path.

    Returns:
        callable: (name, content) -> Path
    """
    def _write(name, content):
        path = tmp_path / name
        path.write_text(json.dumps(content), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def write_problem(write_json):
    """Write a problem file.

    Returns:
        callable: (observables, moments, options=None, name="problem.json") -> Path
    """
    def _write(observables, moments, options=None, name="problem.json"):
        return write_json(name, problem_dict(observables, moments, options))
    return _write


@pytest.fixture
def qubit_z_problem(write_problem):
    """Problem file factory for X = (sigma_z) at a given moment."""
    def _write(m, options=None, name="problem.json"):
        return write_problem([("Z", PAULI_Z.entries)], [m], options, name)
    return _write
