"""Tests for Kraus channels and contraction checks."""

import numpy as np
import pytest

from src.core.channels import (
    ChannelSweep,
    KrausChannel,
    adjoint_apply,
    adjoint_norm_check,
    apply,
    completeness_residual,
    contraction_check,
    dual_norm_witness,
    duality_gap,
    fully_depolarizing_channel,
    identity_channel,
    observable_transfer_sup,
    partial_trace_channel,
    random_channel,
    run_channel_sweep,
    trace_norm_dual_check,
    unitary_channel,
)
from src.core.errors import DimensionMismatchError, PreconditionViolation
from src.core.hermitian import (
    DensityMatrix,
    HermitianOperator,
    maximally_mixed,
    random_density_matrix,
    random_hermitian,
    random_unitary,
    trace_norm_distance,
)


class TestKrausChannel:
    """Tests for KrausChannel construction."""

    def test_identity(self):
        """Test the identity channel."""
        channel = identity_channel(3)
        assert channel.dim_in == 3
        assert channel.dim_out == 3
        assert len(channel) == 1
        assert completeness_residual(channel) == 0.0
        assert channel.adjoint_unital

    def test_broken_completeness(self):
        """Test that non-trace-preserving operators are rejected."""
        with pytest.raises(PreconditionViolation) as exc_info:
            KrausChannel([1.01 * np.eye(2)])
        assert "trace preserving" in str(exc_info.value)

    def test_inconsistent_shapes(self):
        """Test that Kraus operators must share a shape."""
        with pytest.raises(DimensionMismatchError):
            KrausChannel([np.eye(2), np.eye(3)])

    def test_empty(self):
        """Test that at least one operator is required."""
        with pytest.raises(PreconditionViolation):
            KrausChannel([])

    def test_kraus_read_only(self):
        """Test that the Kraus stack cannot be modified."""
        channel = identity_channel(2)
        with pytest.raises(ValueError):
            channel.kraus_ops[0, 0, 0] = 2.0


class TestApply:
    """Tests for the Schroedinger and Heisenberg pictures."""

    def test_identity_apply(self, rng):
        """Test that the identity channel leaves states unchanged."""
        rho = random_density_matrix(3, rng)
        assert np.allclose(apply(identity_channel(3), rho).entries, rho.entries)

    def test_depolarizing(self, rng):
        """Test that full depolarization maps every state to I/d."""
        out = apply(fully_depolarizing_channel(3), random_density_matrix(3, rng))
        assert np.allclose(out.entries, np.eye(3) / 3)

    def test_depolarizing_adjoint(self, rng):
        """Test Phi*(B) = tr(B)/d I for full depolarization."""
        b = random_hermitian(2, rng)
        out = adjoint_apply(fully_depolarizing_channel(2), b)
        assert np.allclose(out.entries, np.real(np.trace(b.entries)) / 2 * np.eye(2))

    def test_partial_trace(self, rng):
        """Test tr_2(rho (x) tau) = rho."""
        rho = random_density_matrix(2, rng)
        tau = random_density_matrix(3, rng)
        product = DensityMatrix(np.kron(rho.entries, tau.entries))
        channel = partial_trace_channel(2, 3)
        assert channel.dim_in == 6
        assert channel.dim_out == 2
        assert np.allclose(apply(channel, product).entries, rho.entries)

    def test_dimension_checks(self):
        """Test that operands must match the channel dimensions."""
        channel = partial_trace_channel(2, 2)
        with pytest.raises(DimensionMismatchError):
            apply(channel, maximally_mixed(2))
        with pytest.raises(DimensionMismatchError):
            adjoint_apply(channel, HermitianOperator.identity(4))

    def test_duality(self, rng):
        """Test tr(Phi(rho) B) = tr(rho Phi*(B))."""
        for seed in range(10):
            channel = random_channel(3, 2, 4, seed)
            gap = duality_gap(channel, random_density_matrix(3, rng), random_hermitian(2, rng))
            assert gap <= 1e-10


class TestContraction:
    """Tests for trace-norm contraction."""

    def test_unitary_preserves_distance(self, rng):
        """Test equality for unitary channels."""
        channel = unitary_channel(random_unitary(3, rng))
        lhs, rhs = contraction_check(channel, random_density_matrix(3, rng), random_density_matrix(3, rng))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_identity_rows_equal(self, rng):
        """Test lhs = rhs for the identity channel."""
        rho = random_density_matrix(2, rng)
        sigma = random_density_matrix(2, rng)
        lhs, rhs = contraction_check(identity_channel(2), rho, sigma)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_random_channels_contract(self, rng):
        """Test that random channels never expand distances."""
        for seed in range(20):
            channel = random_channel(3, 3, 2, seed)
            lhs, rhs = contraction_check(channel, random_density_matrix(3, rng), random_density_matrix(3, rng))
            assert lhs <= rhs + 1e-9

    def test_adjoint_norm(self, rng):
        """Test ||Phi*(B)|| <= ||B|| with equality at B = I."""
        channel = random_channel(2, 3, 2, 7)
        lhs, rhs = adjoint_norm_check(channel, random_hermitian(3, rng))
        assert lhs <= rhs + 1e-9
        lhs, rhs = adjoint_norm_check(channel, HermitianOperator.identity(3))
        assert lhs == pytest.approx(1.0)
        assert rhs == 1.0


class TestDualNorm:
    """Tests for the trace-norm / operator-norm duality."""

    def test_sign_witness(self):
        """Test sign(X) on a diagonal matrix."""
        witness = dual_norm_witness(np.diag([2.0, -1.0, 0.0]))
        assert np.allclose(witness.entries, np.diag([1.0, -1.0, 0.0]))

    def test_trace_norm_dual_check(self, rng):
        """Test that sampled contractions never beat the analytic optimizer."""
        x = random_hermitian(4, rng)
        norm, best, analytic = trace_norm_dual_check(x, rng, samples=50)
        assert analytic == pytest.approx(norm)
        assert best <= norm + 1e-12

    def test_observable_transfer(self, rng):
        """Test that the transfer supremum equals the output distance."""
        channel = random_channel(3, 2, 3, 11)
        rho = random_density_matrix(3, rng)
        sigma = random_density_matrix(3, rng)
        transfer = observable_transfer_sup(channel, rho, sigma)
        output = trace_norm_distance(apply(channel, rho), apply(channel, sigma))
        assert transfer == pytest.approx(output, abs=1e-12)
        assert transfer <= trace_norm_distance(rho, sigma) + 1e-9


class TestRandomChannel:
    """Tests for random Stinespring channels."""

    def test_shapes(self):
        """Test Kraus count and dimensions."""
        channel = random_channel(2, 3, 4, 0)
        assert len(channel) == 4
        assert channel.kraus_ops.shape == (4, 3, 2)
        assert completeness_residual(channel) < 1e-12

    def test_deterministic(self):
        """Test that a seed fixes the channel."""
        a = random_channel(3, 3, 2, 5)
        b = random_channel(3, 3, 2, 5)
        assert np.array_equal(a.kraus_ops, b.kraus_ops)

    def test_no_isometry(self):
        """Test that r * e < d is rejected."""
        with pytest.raises(PreconditionViolation):
            random_channel(4, 1, 2, 0)


class TestChannelSweep:
    """Tests for the threaded random-channel sweep."""

    def test_no_violations(self):
        """Test zero violations over a small sweep."""
        result = run_channel_sweep(3, trials=50, seed=0)
        assert len(result.trials) == 50
        assert result.violations == 0
        assert result.max_duality_gap <= 1e-10
        assert [t.index for t in result.trials] == list(range(50))

    def test_independent_of_workers(self):
        """Test that results do not depend on the thread count."""
        serial = ChannelSweep(2, trials=20, seed=3, max_workers=1).run()
        threaded = ChannelSweep(2, trials=20, seed=3, max_workers=4).run()
        assert serial == threaded

    def test_default_workers(self):
        """Test the default worker cap."""
        sweep = ChannelSweep(2)
        assert 1 <= sweep.max_workers <= 8
        assert sweep.dim_out == 2
        assert sweep.env_dim == 2

    def test_rectangular_channels(self):
        """Test a sweep with different input and output dimensions."""
        result = run_channel_sweep(2, trials=10, seed=1, dim_out=3, env_dim=2)
        assert result.contraction_violations == 0
        assert result.adjoint_violations == 0
