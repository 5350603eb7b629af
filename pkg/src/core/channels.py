"""CPTP channels in Kraus form and their trace-norm contraction checks."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import DimensionMismatchError, PreconditionViolation
from src.core.hermitian import (
    DensityMatrix,
    HermitianOperator,
    operator_norm,
    random_density_matrix,
    random_hermitian,
    trace_norm,
    trace_norm_distance,
)

logger = logging.getLogger(__name__)

COMPLETENESS_TOL = 1e-9
UNITALITY_TOL = 1e-9
CONTRACTION_TOL = 1e-9

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A CPTP map Phi(rho) = sum_j K_j rho K_j^dagger.

    Attributes:
        dim_in: Input dimension d
        dim_out: Output dimension r
        kraus_ops: Read-only array of shape (n, r, d)
    """
    dim_in: int
    dim_out: int
    kraus_ops: np.ndarray

    def __init__(self, kraus_ops: Sequence[np.ndarray], tol: float = COMPLETENESS_TOL):
        """Initialize a channel from its Kraus operators.

        Raises:
            DimensionMismatchError: If the operators differ in shape
            PreconditionViolation: If sum_j K_j^dagger K_j differs from
                I_d by more than tol
        """
        ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        if not ops:
            raise PreconditionViolation("A channel needs at least one Kraus operator")
        shapes = {k.shape for k in ops}
        if len(shapes) != 1 or len(ops[0].shape) != 2:
            raise DimensionMismatchError(f"Kraus operators have inconsistent shapes: {sorted(shapes)}")
        stack = np.stack(ops)
        stack.setflags(write=False)
        object.__setattr__(self, "kraus_ops", stack)
        object.__setattr__(self, "dim_out", stack.shape[1])
        object.__setattr__(self, "dim_in", stack.shape[2])

        residual = completeness_residual(self)
        if residual > tol:
            raise PreconditionViolation(f"Kraus operators are not trace preserving (residual {residual:.3e})")

    @property
    def adjoint_unital(self) -> bool:
        """Phi*(I_r) = I_d within 1e-9."""
        unit = adjoint_apply(self, HermitianOperator.identity(self.dim_out))
        return bool(np.max(np.abs(unit.entries - np.eye(self.dim_in))) <= UNITALITY_TOL)

    def __len__(self) -> int:
        return self.kraus_ops.shape[0]

    def __repr__(self) -> str:
        return f"KrausChannel(dim_in={self.dim_in}, dim_out={self.dim_out}, kraus={len(self)})"


def completeness_residual(channel: Union[KrausChannel, np.ndarray]) -> float:
    """Largest entry of |sum_j K_j^dagger K_j - I_d|."""
    ops = channel.kraus_ops if isinstance(channel, KrausChannel) else np.asarray(channel)
    total = np.einsum("jab,jac->bc", ops.conj(), ops)
    return float(np.max(np.abs(total - np.eye(ops.shape[2]))))


def apply(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """Phi(rho) = sum_j K_j rho K_j^dagger.

    The output is renormalized to unit trace.

    Raises:
        DimensionMismatchError: If rho is not dim_in-dimensional
    """
    if rho.dim != channel.dim_in:
        raise DimensionMismatchError(f"Channel expects dim {channel.dim_in}, state has dim {rho.dim}")
    k = channel.kraus_ops
    out = np.einsum("jab,bc,jdc->ad", k, rho.entries, k.conj())
    return DensityMatrix.from_unnormalized(out)


def adjoint_apply(channel: KrausChannel, operator: HermitianOperator) -> HermitianOperator:
    """Heisenberg-picture map Phi*(B) = sum_j K_j^dagger B K_j.

    Raises:
        DimensionMismatchError: If B is not dim_out-dimensional
    """
    if operator.dim != channel.dim_out:
        raise DimensionMismatchError(f"Channel output has dim {channel.dim_out}, operator has dim {operator.dim}")
    k = channel.kraus_ops
    return HermitianOperator(np.einsum("jba,bc,jcd->ad", k.conj(), operator.entries, k))


def duality_gap(channel: KrausChannel, rho: DensityMatrix, operator: HermitianOperator) -> float:
    """|tr(Phi(rho) B) - tr(rho Phi*(B))|."""
    forward = np.trace(apply(channel, rho).entries @ operator.entries)
    backward = np.trace(rho.entries @ adjoint_apply(channel, operator).entries)
    return float(abs(forward - backward))


def contraction_check(channel: KrausChannel, rho: DensityMatrix, sigma: DensityMatrix) -> Tuple[float, float]:
    """(||Phi(rho) - Phi(sigma)||_1, ||rho - sigma||_1)."""
    return trace_norm_distance(apply(channel, rho), apply(channel, sigma)), trace_norm_distance(rho, sigma)


def adjoint_norm_check(channel: KrausChannel, operator: HermitianOperator) -> Tuple[float, float]:
    """(||Phi*(B)||, ||B||) in operator norm."""
    return operator_norm(adjoint_apply(channel, operator)), operator_norm(operator)


def dual_norm_witness(matrix: Union[HermitianOperator, np.ndarray]) -> HermitianOperator:
    """sign(X), the maximizer of |tr(B X)| over ||B|| <= 1.

    Zero eigenvalues map to 0.
    """
    a = matrix.entries if isinstance(matrix, HermitianOperator) else np.asarray(matrix)
    w, u = np.linalg.eigh(a)
    return HermitianOperator((u * np.sign(w)) @ u.conj().T)


def trace_norm_dual_check(
    matrix: HermitianOperator, rng: np.random.Generator, samples: int = 100
) -> Tuple[float, float, float]:
    """Compare ||X||_1 with sup |tr(B X)| over sampled and analytic contractions.

    Returns:
        Tuple of (trace norm, best sampled value, value at sign(X))
    """
    norm = trace_norm(matrix)
    best = 0.0
    for _ in range(samples):
        b = random_hermitian(matrix.dim, rng)
        b = b.scaled(1.0 / max(operator_norm(b), 1e-300))
        best = max(best, float(abs(np.trace(b.entries @ matrix.entries))))
    analytic = float(abs(np.trace(dual_norm_witness(matrix).entries @ matrix.entries)))
    return norm, best, analytic


def observable_transfer_sup(channel: KrausChannel, rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """sup over ||B|| <= 1 of |tr((rho - sigma) Phi*(B))|.

    Attained at B = sign(Phi(rho) - Phi(sigma)).
    """
    difference = apply(channel, rho).entries - apply(channel, sigma).entries
    pulled = adjoint_apply(channel, dual_norm_witness(difference))
    return float(abs(np.trace((rho.entries - sigma.entries) @ pulled.entries)))


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel([np.eye(dim)])


def fully_depolarizing_channel(dim: int) -> KrausChannel:
    """rho -> I/d, with Kraus operators |a><b| / sqrt(d)."""
    ops = []
    for a in range(dim):
        for b in range(dim):
            k = np.zeros((dim, dim), dtype=complex)
            k[a, b] = 1 / np.sqrt(dim)
            ops.append(k)
    return KrausChannel(ops)


def partial_trace_channel(dim_keep: int, dim_discard: int) -> KrausChannel:
    """Trace out the second factor of C^dim_keep (x) C^dim_discard."""
    ops = []
    for j in range(dim_discard):
        bra = np.zeros((1, dim_discard))
        bra[0, j] = 1.0
        ops.append(np.kron(np.eye(dim_keep), bra))
    return KrausChannel(ops)


def unitary_channel(unitary: np.ndarray) -> KrausChannel:
    return KrausChannel([unitary])


def random_channel(dim_in: int, dim_out: int, env_dim: int, seed: Seed) -> KrausChannel:
    """Channel from a Haar-random Stinespring isometry W: C^d -> C^r (x) C^e.

    Kraus operators are K_j = (I_r (x) <j|) W. Deterministic per seed.

    Raises:
        PreconditionViolation: If env_dim < 1 or r * e < d
    """
    if env_dim < 1 or dim_in < 1 or dim_out < 1:
        raise PreconditionViolation("Channel dimensions must be positive")
    if dim_out * env_dim < dim_in:
        raise PreconditionViolation(
            f"No isometry from C^{dim_in} into C^{dim_out} (x) C^{env_dim}"
        )
    rng = np.random.default_rng(seed)
    rows = dim_out * env_dim
    g = rng.standard_normal((rows, dim_in)) + 1j * rng.standard_normal((rows, dim_in))
    q, r = np.linalg.qr(g)
    isometry = q * (np.diag(r) / np.abs(np.diag(r)))
    blocks = isometry.reshape(dim_out, env_dim, dim_in)
    return KrausChannel([blocks[:, j, :] for j in range(env_dim)])


@dataclass(frozen=True)
class TrialResult:
    """Checks for one random (channel, rho, sigma, B) draw."""
    index: int
    contraction: Tuple[float, float]
    adjoint_norm: Tuple[float, float]
    duality_gap: float
    completeness: float

    @property
    def contraction_violated(self) -> bool:
        return self.contraction[0] > self.contraction[1] + CONTRACTION_TOL

    @property
    def adjoint_violated(self) -> bool:
        return self.adjoint_norm[0] > self.adjoint_norm[1] + CONTRACTION_TOL


@dataclass(frozen=True)
class SweepResult:
    """Aggregated random-channel sweep.

    Attributes:
        trials: Per-trial results ordered by trial index
        contraction_violations: Trials with ||Phi(rho)-Phi(sigma)||_1 > ||rho-sigma||_1
        adjoint_violations: Trials with ||Phi*(B)|| > ||B||
        max_duality_gap: Largest |tr(Phi(rho)B) - tr(rho Phi*(B))|
    """
    trials: Tuple[TrialResult, ...]
    contraction_violations: int
    adjoint_violations: int
    max_duality_gap: float

    @property
    def violations(self) -> int:
        return self.contraction_violations + self.adjoint_violations


class ChannelSweep:
    """Random Stinespring channels checked on a thread pool.

    Each trial draws from its own SeedSequence child, so results do not
    depend on scheduling or on max_workers.
    """

    def __init__(
        self,
        dim_in: int,
        dim_out: Optional[int] = None,
        env_dim: Optional[int] = None,
        trials: int = 1000,
        seed: int = 0,
        max_workers: Optional[int] = None,
    ):
        """Initialize the sweep.

        Args:
            dim_in: Input dimension d
            dim_out: Output dimension (default d)
            env_dim: Environment dimension (default d)
            trials: Number of random draws
            seed: Root seed
            max_workers: Thread count (default: CPU count, capped at 8)
        """
        self.dim_in = dim_in
        self.dim_out = dim_in if dim_out is None else dim_out
        self.env_dim = dim_in if env_dim is None else env_dim
        self.trials = trials
        self.seed = seed

        if max_workers is None:
            cpu_count = os.cpu_count() or 4
            self.max_workers = min(cpu_count, 8)
        else:
            self.max_workers = max_workers

    def _run_trial(self, index: int, seed: np.random.SeedSequence) -> TrialResult:
        channel_seed, state_seed = seed.spawn(2)
        channel = random_channel(self.dim_in, self.dim_out, self.env_dim, channel_seed)
        rng = np.random.default_rng(state_seed)
        rho = random_density_matrix(self.dim_in, rng)
        sigma = random_density_matrix(self.dim_in, rng)
        b = random_hermitian(self.dim_out, rng)
        b = b.scaled(1.0 / max(operator_norm(b), 1e-300))
        return TrialResult(
            index=index,
            contraction=contraction_check(channel, rho, sigma),
            adjoint_norm=adjoint_norm_check(channel, b),
            duality_gap=duality_gap(channel, rho, b),
            completeness=completeness_residual(channel),
        )

    def run(self) -> SweepResult:
        """Run every trial and collect the results in trial order."""
        children = np.random.SeedSequence(self.seed).spawn(self.trials)
        results: List[TrialResult] = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_index = {
                executor.submit(self._run_trial, i, child): i
                for i, child in enumerate(children)
            }
            for future in as_completed(future_to_index):
                results.append(future.result())

        results.sort(key=lambda r: r.index)
        sweep = SweepResult(
            trials=tuple(results),
            contraction_violations=sum(r.contraction_violated for r in results),
            adjoint_violations=sum(r.adjoint_violated for r in results),
            max_duality_gap=max((r.duality_gap for r in results), default=0.0),
        )
        logger.info(
            "Channel sweep: %d trials, %d contraction and %d adjoint violations, max duality gap %.3e",
            self.trials, sweep.contraction_violations, sweep.adjoint_violations, sweep.max_duality_gap,
        )
        return sweep


def run_channel_sweep(
    dim_in: int,
    trials: int,
    seed: int,
    dim_out: Optional[int] = None,
    env_dim: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> SweepResult:
    """Convenience wrapper around ChannelSweep.run."""
    return ChannelSweep(dim_in, dim_out, env_dim, trials, seed, max_workers).run()


__all__ = [
    "ChannelSweep",
    "KrausChannel",
    "SweepResult",
    "TrialResult",
    "adjoint_apply",
    "adjoint_norm_check",
    "apply",
    "completeness_residual",
    "contraction_check",
    "dual_norm_witness",
    "duality_gap",
    "fully_depolarizing_channel",
    "identity_channel",
    "observable_transfer_sup",
    "partial_trace_channel",
    "random_channel",
    "run_channel_sweep",
    "trace_norm_dual_check",
]
