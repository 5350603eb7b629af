"""Tests for the convergence harness."""

import math

import numpy as np
import pytest

from src.core.channels import fully_depolarizing_channel, identity_channel, random_channel
from src.core.dual_solver import SolverOptions, solve_boundary, solve_interior
from src.core.errors import PreconditionViolation, SelfCheckError
from src.core.harness import (
    BOUNDARY_APPROACH,
    MIX_TO_SIGMA,
    MOMENT_JITTER,
    ConvergenceRow,
    SequenceSpec,
    adversarial_sequence,
    anchor_state,
    boundary_path_bound,
    boundary_surrogate,
    channel_transfer_check,
    constraint_set_samples,
    equivalence_check,
    final_threshold,
    generate_sequence,
    necessity_check,
    run_convergence,
)
from src.core.hermitian import maximally_mixed, trace_norm_distance, von_neumann_entropy
from src.core.moments import moment_map


@pytest.fixture
def qubit_solution(qubit_z):
    """Interior solution for sigma_z at m = 0.5."""
    return solve_interior(qubit_z, [0.5])


class TestSequenceSpec:
    """Tests for SequenceSpec validation."""

    def test_aliases(self):
        """Test that short kind names are normalized."""
        assert SequenceSpec("mix", 3).kind == MIX_TO_SIGMA
        assert SequenceSpec("jitter", 3).kind == MOMENT_JITTER
        assert SequenceSpec("boundary", 3).kind == BOUNDARY_APPROACH
        assert SequenceSpec(MIX_TO_SIGMA, 3).kind == MIX_TO_SIGMA

    def test_unknown_kind(self):
        """Test that unknown kinds are rejected."""
        with pytest.raises(PreconditionViolation):
            SequenceSpec("spiral", 3)

    def test_invalid_length(self):
        """Test that empty sequences are rejected."""
        with pytest.raises(PreconditionViolation):
            SequenceSpec("mix", 0)

    def test_invalid_noise(self):
        """Test negative noise and mixing weights above one."""
        with pytest.raises(PreconditionViolation):
            SequenceSpec("jitter", 3, noise_scale=-0.1)
        with pytest.raises(PreconditionViolation):
            SequenceSpec("mix", 3, noise_scale=1.5)

    def test_schedule(self):
        """Test t_n = noise_scale / n."""
        assert np.allclose(SequenceSpec("mix", 4, noise_scale=0.5).schedule(), [0.5, 0.25, 0.5 / 3, 0.125])


class TestConvergence:
    """Tests for generate_sequence and run_convergence."""

    def test_mix_sequence_deterministic(self, qubit_z, qubit_solution):
        """Test that a seed fixes the sequence."""
        spec = SequenceSpec("mix", 5, seed=42)
        a = generate_sequence(qubit_solution, qubit_z, spec)
        b = generate_sequence(qubit_solution, qubit_z, spec)
        assert len(a) == 5
        assert all(np.array_equal(x.entries, y.entries) for x, y in zip(a, b))

    def test_mix_convergence(self, qubit_bloch):
        """Test the 2 t_N rate and rowwise bound domination."""
        solution = solve_interior(qubit_bloch, [0.2, -0.3, 0.1])
        spec = SequenceSpec("mix", 50, seed=1)
        record = run_convergence(solution, qubit_bloch, spec)
        assert len(record.rows) == 50
        assert [row.n for row in record.rows] == list(range(1, 51))
        assert record.final_distance <= 2 / 50
        assert record.final_threshold == pytest.approx(2 / 50)
        assert record.bound_violations() == []
        assert all(row.identity_residual <= 1e-8 for row in record.rows)

    def test_single_row(self, qubit_z, qubit_solution):
        """Test N = 1."""
        record = run_convergence(qubit_solution, qubit_z, SequenceSpec("mix", 1))
        assert len(record.rows) == 1

    def test_jitter_convergence(self, qubit_bloch):
        """Test moment jitter toward an interior point."""
        solution = solve_interior(qubit_bloch, [0.2, 0.1, 0.0])
        spec = SequenceSpec("jitter", 4, noise_scale=0.1, seed=2)
        record = run_convergence(solution, qubit_bloch, spec)
        errors = record.column("moment_error")
        assert errors[-1] == pytest.approx(0.1 / 4, abs=1e-6)
        assert record.final_distance <= record.final_threshold

    def test_boundary_approach(self, qubit_z):
        """Test path states approaching the boundary limit."""
        solution = solve_boundary(qubit_z, [1.0])
        record = run_convergence(solution, qubit_z, SequenceSpec("boundary", 20))
        assert len(record.rows) == 20
        assert record.final_distance <= 1e-4
        assert math.isinf(record.rows[-1].relative_entropy)
        assert record.final_threshold == pytest.approx(2.0 ** -20, abs=1e-7)
        assert all(row.pinsker_mixed_bound is None for row in record.rows)

    @pytest.mark.parametrize("length", [1, 5, 10])
    def test_short_boundary_approach(self, qubit_z, length):
        """Test that short paths pass with a threshold of order 2^-N."""
        solution = solve_boundary(qubit_z, [1.0])
        record = run_convergence(solution, qubit_z, SequenceSpec("boundary", length))
        assert record.final_distance == pytest.approx(2.0 ** -length, abs=1e-8)
        assert record.final_distance <= record.final_threshold
        assert record.final_threshold <= 2.0 ** -length + 1e-6

    def test_boundary_path_bound_bloch(self, qubit_bloch):
        """Test the path bound on a pure limit off the coordinate axes."""
        solution = solve_boundary(qubit_bloch, [0.6, 0.0, 0.8])
        path = generate_sequence(solution, qubit_bloch, SequenceSpec("boundary", 6))
        for j, rho in enumerate(path, start=1):
            bound = boundary_path_bound(solution, qubit_bloch, rho, 2.0 ** -j)
            assert trace_norm_distance(rho, solution.sigma) <= bound + 1e-8
            assert bound == pytest.approx(2.0 ** -j, abs=1e-6)

    def test_anchor_state(self, qubit_z):
        """Test I/d for the automatic anchor and a Gibbs state otherwise."""
        assert np.allclose(anchor_state(qubit_z, solve_boundary(qubit_z, [1.0])).entries, np.eye(2) / 2)
        options = SolverOptions(interior_anchor=(0.5,))
        solution = solve_boundary(qubit_z, [1.0], options)
        assert np.allclose(anchor_state(qubit_z, solution).entries, np.diag([0.75, 0.25]), atol=1e-8)

    def test_final_distance_violation(self, qubit_z, qubit_solution):
        """Test that a sequence that does not converge is flagged."""
        spec = SequenceSpec("mix", 10, noise_scale=0.1)
        sequence = [maximally_mixed(2)] * 10
        with pytest.raises(SelfCheckError) as exc_info:
            run_convergence(qubit_solution, qubit_z, spec, sequence=sequence)
        assert any("final trace distance" in v for v in exc_info.value.violations)

    def test_final_threshold(self):
        """Test the convexity rate, the Pinsker rate and the path bound."""
        row = ConvergenceRow(
            n=1,
            moment_error=0.0,
            entropy_gap=0.0,
            relative_entropy=0.02,
            trace_distance=0.0,
            pinsker_mixed_bound=None,
            identity_residual=None,
        )
        assert final_threshold(SequenceSpec("mix", 10, noise_scale=0.5), row) == pytest.approx(0.1)
        assert final_threshold(SequenceSpec("jitter", 10), row) == pytest.approx(0.2)
        diverged = ConvergenceRow(1, 0.0, 0.0, math.inf, 0.0, None, None)
        assert final_threshold(SequenceSpec("boundary", 10), diverged, 2.0 ** -10) == pytest.approx(2.0 ** -10, abs=1e-7)
        assert final_threshold(SequenceSpec("boundary", 10), row, 0.5) == pytest.approx(0.2)
        assert math.isinf(final_threshold(SequenceSpec("boundary", 10), diverged))


class TestEquivalence:
    """Tests for the forward equivalence checks."""

    def test_mix_sequence(self, qubit_bloch):
        """Test moment and entropy control by trace distance."""
        solution = solve_interior(qubit_bloch, [0.1, 0.1, 0.1])
        sequence = generate_sequence(solution, qubit_bloch, SequenceSpec("mix", 20, seed=5))
        verdict = equivalence_check(solution, qubit_bloch, sequence)
        assert verdict.holds
        assert verdict.failing_rows == []
        assert len(verdict.rows) == 20


class TestNecessity:
    """Tests for constraint-set samples and the adversarial sequence."""

    def test_samples_in_constraint_set(self, qubit_z, qubit_solution, rng):
        """Test that samples keep the moments and never beat S(sigma)."""
        samples = constraint_set_samples(qubit_solution, qubit_z, 10, rng)
        assert len(samples) == 10
        for rho in samples:
            assert abs(moment_map(rho, qubit_z).as_array()[0] - 0.5) < 1e-8
            assert von_neumann_entropy(rho) <= qubit_solution.entropy + 1e-7

    def test_singleton_has_no_samples(self, qubit_bloch, rng):
        """Test that a full operator system pins the state."""
        solution = solve_interior(qubit_bloch, [0.1, 0.2, 0.3])
        assert constraint_set_samples(solution, qubit_bloch, 5, rng) == []
        assert adversarial_sequence(solution, qubit_bloch, 5) is None
        assert necessity_check(solution, qubit_bloch) is None

    def test_adversarial_sequence(self, qubit_z, qubit_solution):
        """Test fixed moments with trace distance bounded away from zero."""
        sequence = adversarial_sequence(qubit_solution, qubit_z, 100)
        assert len(sequence) == 100
        assert min(trace_norm_distance(rho, qubit_solution.sigma) for rho in sequence) > 0.01

    def test_necessity_check(self, qubit_z, qubit_solution):
        """Test the summary of the adversarial sequence."""
        result = necessity_check(qubit_solution, qubit_z, length=100)
        assert result.min_trace_distance > 0.01
        assert result.min_entropy_gap > 0
        assert result.max_moment_error < 1e-9

    def test_singular_sigma_skipped(self, qubit_z):
        """Test that a rank-deficient sigma has no adversarial sequence."""
        solution = solve_boundary(qubit_z, [1.0])
        assert adversarial_sequence(solution, qubit_z, 10) is None


class TestBoundarySurrogate:
    """Tests for consecutive-state diagnostics."""

    def test_path_surrogate(self, qubit_z):
        """Test that consecutive path states settle."""
        solution = solve_boundary(qubit_z, [1.0])
        surrogate = boundary_surrogate(solution.path_trace)
        assert surrogate.window == 5
        assert len(surrogate.trace_distances) == len(solution.path_trace) - 1
        assert surrogate.window_max_relative_entropy < 1e-6
        assert surrogate.window_max_trace_distance < 1e-6
        assert "final-window" in surrogate.label

    def test_bloch_path_surrogate(self, qubit_bloch):
        """Test final-window maxima below 1e-6 on a pure limit off the axes."""
        solution = solve_boundary(qubit_bloch, [0.6, 0.0, 0.8])
        surrogate = boundary_surrogate(solution.path_trace)
        assert surrogate.window_max_relative_entropy < 1e-6
        assert surrogate.window_max_trace_distance < 1e-6

    def test_short_path(self, qubit_z):
        """Test that one step is not enough."""
        solution = solve_boundary(qubit_z, [1.0])
        with pytest.raises(PreconditionViolation):
            boundary_surrogate(solution.path_trace[:1])


class TestChannelTransfer:
    """Tests for stability through channels."""

    def test_identity_channel(self, qubit_z, qubit_solution):
        """Test that the identity channel preserves every distance."""
        sequence = generate_sequence(qubit_solution, qubit_z, SequenceSpec("mix", 5))
        rows = channel_transfer_check(identity_channel(2), sequence, qubit_solution.sigma)
        for row in rows:
            assert row.holds
            assert row.output_distance == pytest.approx(row.input_distance, abs=1e-12)

    def test_random_channel(self, qubit_z, qubit_solution, rng):
        """Test contraction and observable transfer through a random channel."""
        sequence = generate_sequence(qubit_solution, qubit_z, SequenceSpec("mix", 10, seed=3))
        rows = channel_transfer_check(random_channel(2, 3, 2, 8), sequence, qubit_solution.sigma, rng)
        assert all(row.holds for row in rows)

    def test_depolarizing_collapses(self, qubit_z, qubit_solution):
        """Test that full depolarization sends every output distance to zero."""
        sequence = generate_sequence(qubit_solution, qubit_z, SequenceSpec("mix", 3))
        rows = channel_transfer_check(fully_depolarizing_channel(2), sequence, qubit_solution.sigma)
        assert all(row.output_distance < 1e-12 for row in rows)
