"""End-to-end property checks at full sample sizes."""

import math

import numpy as np
import pytest

from src.core.bounds import (
    certify,
    entropy_gap_identity,
    fannes_audenaert,
    pinsker_exact_rate,
    pinsker_mixed_rate,
)
from src.core.channels import run_channel_sweep
from src.core.dual_solver import (
    dual_gradient,
    dual_hessian,
    log_partition,
    solve_boundary,
    solve_interior,
)
from src.core.harness import SequenceSpec, constraint_set_samples, necessity_check, run_convergence
from src.core.hermitian import (
    DensityMatrix,
    maximally_mixed,
    pure_state,
    random_density_matrix,
    random_hermitian,
    trace_norm_distance,
    von_neumann_entropy,
)
from src.core.moments import (
    BOUNDARY,
    INFEASIBLE,
    INTERIOR,
    ConstraintSet,
    FeasibilityOptions,
    check_feasibility,
    moment_map,
)
from src.utils.formats import CertificateModel, ResultFile, SolutionModel, parse_result, serialize_model


def random_instance(rng, dim, k):
    """Random observables with moments of a full-rank state, solved in the interior."""
    constraints = ConstraintSet([random_hermitian(dim, rng) for _ in range(k)])
    m = moment_map(random_density_matrix(dim, rng), constraints)
    return constraints, solve_interior(constraints, m)


def test_entropy_gap_identity(rng):
    """D(rho || sigma) = S(sigma) - S(rho) + lambda . (m(rho) - m) on 500 instances."""
    worst = 0.0
    for i in range(500):
        dim = (2, 3, 4, 8)[i % 4]
        constraints, solution = random_instance(rng, dim, 1 + i % 3)
        _, _, residual = entropy_gap_identity(random_density_matrix(dim, rng), solution, constraints)
        worst = max(worst, residual)
    assert worst <= 1e-8


def test_qubit_closed_form(qubit_z):
    """sigma_z at m = 0.5: tanh and binary-entropy oracles."""
    solution = solve_interior(qubit_z, [0.5])
    assert abs(solution.lambda_[0] + math.atanh(0.5)) <= 1e-8
    assert trace_norm_distance(solution.sigma, DensityMatrix(np.diag([0.75, 0.25]))) <= 1e-8
    assert abs(solution.entropy - 0.562335) <= 1e-6


def test_dual_calculus(rng):
    """Gradient and Hessian against central differences on 100 draws."""
    for _ in range(100):
        dim = int(rng.integers(2, 6))
        k = int(rng.integers(1, 4))
        constraints = ConstraintSet([random_hermitian(dim, rng) for _ in range(k)])
        lam = rng.standard_normal(k)
        basis = np.eye(k)

        h = 1e-6
        numeric_gradient = np.array([
            (log_partition(constraints, lam + h * e) - log_partition(constraints, lam - h * e)) / (2 * h)
            for e in basis
        ])
        assert np.max(np.abs(dual_gradient(constraints, lam) - numeric_gradient)) <= 1e-6

        h = 1e-5
        numeric_hessian = np.column_stack([
            (dual_gradient(constraints, lam + h * e) - dual_gradient(constraints, lam - h * e)) / (2 * h)
            for e in basis
        ])
        assert np.max(np.abs(dual_hessian(constraints, lam) - numeric_hessian)) <= 1e-4


def test_maximality(rng):
    """No sampled rho in C(m) beats S(sigma) on 100 instances."""
    sampled = 0
    for i in range(100):
        dim = (2, 3, 4)[i % 3]
        constraints, solution = random_instance(rng, dim, 1 + i % 2)
        for rho in constraint_set_samples(solution, constraints, 20, rng):
            assert von_neumann_entropy(rho) <= solution.entropy + 1e-7
            sampled += 1
    assert sampled == 2000


def test_pinsker_suite(rng):
    """2000 evaluations of the exact and mixed rates."""
    evaluations = 0
    for i in range(100):
        dim = (2, 3, 4)[i % 3]
        constraints, solution = random_instance(rng, dim, 1 + i % 2)
        for rho in constraint_set_samples(solution, constraints, 10, rng):
            assert trace_norm_distance(rho, solution.sigma) <= pinsker_exact_rate(rho, solution, constraints) + 1e-8
            evaluations += 1
        for _ in range(10):
            rho = random_density_matrix(dim, rng)
            assert trace_norm_distance(rho, solution.sigma) <= pinsker_mixed_rate(rho, solution, constraints) + 1e-8
            evaluations += 1
    assert evaluations == 2000


def test_fannes_audenaert(rng):
    """2000 random pairs for d = 2..8 plus the equality case."""
    for i in range(2000):
        dim = 2 + i % 7
        difference, bound = fannes_audenaert(random_density_matrix(dim, rng), random_density_matrix(dim, rng))
        assert difference <= bound + 1e-12

    difference, bound = fannes_audenaert(pure_state([1, 0]), maximally_mixed(2))
    assert abs(difference - math.log(2)) <= 1e-9
    assert abs(bound - math.log(2)) <= 1e-9


def test_bloch_ball_feasibility(qubit_bloch):
    """check_feasibility agrees with ||m|| <= 1 on a 10^3 grid."""
    opts = FeasibilityOptions(produce_witness=False)
    axis = np.linspace(-1.2, 1.2, 10)
    checked = 0
    for x in axis:
        for y in axis:
            for z in axis:
                m = np.array([x, y, z])
                radius = np.linalg.norm(m)
                if abs(radius - 1) <= 1e-6:
                    continue
                verdict = check_feasibility(qubit_bloch, m, opts)
                expected = INTERIOR if radius < 1 else INFEASIBLE
                assert verdict.status == expected, f"m={m}, margin={verdict.margin}"
                checked += 1
    assert checked == 1000


@pytest.mark.parametrize("m", [
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.6, 0.0, 0.8],
])
def test_bloch_sphere_boundary(qubit_bloch, m):
    """Unit Bloch vectors classify as boundary."""
    verdict = check_feasibility(qubit_bloch, m, FeasibilityOptions(produce_witness=False))
    assert verdict.status == BOUNDARY


def test_boundary_limit(qubit_z):
    """Path following at m = 1 reaches |0><0|."""
    solution = solve_boundary(qubit_z, [1.0])
    assert trace_norm_distance(solution.sigma, pure_state([1, 0])) <= 1e-5
    assert solution.entropy <= 1e-5


def test_convergence_and_necessity(qubit_z):
    """Mix-to-sigma reaches 2e-3 at N = 1000; matched moments alone do not converge."""
    solution = solve_interior(qubit_z, [0.5])
    record = run_convergence(solution, qubit_z, SequenceSpec("mix", 1000, seed=0))
    assert record.final_distance <= 2e-3
    assert record.bound_violations() == []

    necessity = necessity_check(solution, qubit_z, length=1000)
    assert necessity.min_trace_distance > 0.01
    assert necessity.min_entropy_gap > 0
    assert necessity.max_moment_error <= 1e-9


def test_channel_stability():
    """1000 random Stinespring channels without a data-processing violation."""
    result = run_channel_sweep(3, trials=1000, seed=0)
    assert result.violations == 0
    assert result.max_duality_gap <= 1e-10


def test_result_round_trip(rng, qubit_z):
    """serialize then parse is the identity on every numeric payload."""
    for _ in range(20):
        constraints, solution = random_instance(rng, 3, 2)
        report = certify(random_density_matrix(3, rng), solution, constraints)
        result = ResultFile(
            command="certify",
            solution=SolutionModel.from_solution(solution),
            certificate=CertificateModel.from_report(report),
        )
        text = serialize_model(result)
        assert parse_result(text) == result
        assert serialize_model(parse_result(text)) == text

    boundary = solve_boundary(qubit_z, [1.0])
    report = certify(pure_state([0, 1]), boundary, qubit_z)
    result = ResultFile(command="certify", certificate=CertificateModel.from_report(report))
    text = serialize_model(result)
    assert serialize_model(parse_result(text)) == text
