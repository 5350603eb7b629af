"""Tests for the settings manager."""

import pytest

from src.core.dual_solver import SolverOptions
from src.core.moments import FeasibilityOptions
from src.utils.formats import ProblemOptions
from src.utils.settings import SettingsManager


@pytest.fixture
def settings_manager():
    """Create a settings manager with empty layers."""
    return SettingsManager()


def test_defaults(settings_manager):
    """Test that empty layers give the library defaults."""
    assert settings_manager.restore_solver_options() == SolverOptions()
    assert settings_manager.restore_feasibility_options() == FeasibilityOptions()
    assert settings_manager.restore_seed() == 0


def test_file_options(settings_manager):
    """Test that the options block overrides defaults."""
    settings_manager.save_file_options(ProblemOptions(grad_tol=1e-11, path_tol=1e-6, seed=9))
    options = settings_manager.restore_solver_options()

    assert options.grad_tol == 1e-11
    assert options.path_tol == 1e-6
    assert options.max_newton_iters == SolverOptions().max_newton_iters
    assert settings_manager.restore_seed() == 9


def test_flags_override_file(settings_manager):
    """Test that command-line flags win over the file."""
    settings_manager.save_file_options(ProblemOptions(grad_tol=1e-11, max_newton_iters=50))
    settings_manager.save_cli_flags("solve", tol=1e-7)
    options = settings_manager.restore_solver_options()

    assert options.grad_tol == 1e-7
    assert options.max_newton_iters == 50


def test_unset_flags_keep_file(settings_manager):
    """Test that flags left as None do not clear file values."""
    settings_manager.save_file_options(ProblemOptions(seed=3))
    settings_manager.save_cli_flags("solve")

    assert settings_manager.restore_seed() == 3


def test_feasibility_flag_mapping(settings_manager):
    """Test that --tol and --max-iter address the feasibility search."""
    settings_manager.save_cli_flags("feasibility", tol=1e-6, max_iter=10, seed=2)
    feasibility = settings_manager.restore_feasibility_options()
    solver = settings_manager.restore_solver_options()

    assert feasibility.feas_tol == 1e-6
    assert feasibility.max_iter == 10
    assert feasibility.seed == 2
    assert solver == SolverOptions()


def test_solver_flag_mapping(settings_manager):
    """Test that other commands address the Newton solver."""
    settings_manager.save_cli_flags("certify", tol=1e-8, max_iter=25)
    solver = settings_manager.restore_solver_options()

    assert solver.grad_tol == 1e-8
    assert solver.max_newton_iters == 25
    assert settings_manager.restore_feasibility_options() == FeasibilityOptions()


def test_file_feasibility_keys(settings_manager):
    """Test the renamed feasibility keys of the options block."""
    settings_manager.save_file_options(ProblemOptions(feas_tol=1e-5, feasibility_max_iter=300))
    feasibility = settings_manager.restore_feasibility_options()

    assert feasibility.feas_tol == 1e-5
    assert feasibility.max_iter == 300


def test_clear_file_options(settings_manager):
    """Test that saving None clears the file layer."""
    settings_manager.save_file_options(ProblemOptions(seed=5))
    settings_manager.save_file_options(None)

    assert settings_manager.restore_seed() == 0
