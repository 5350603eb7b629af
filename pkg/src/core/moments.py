"""Moment map, moment body and feasibility of moment data.

The moment body M_X = {m(rho)} is compact and convex, its support
function is h(lambda) = lambda_max(sum_i lambda_i X_i), and target data m
is feasible iff <lambda, m> <= h(lambda) for every direction lambda.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import null_space

from src.core.errors import (
    ContractViolation,
    DimensionMismatchError,
    IndeterminateVerdictError,
    PreconditionViolation,
    NumericalBackendError,
)
from src.core.hermitian import (
    DensityMatrix,
    HermitianOperator,
    random_unit_vector,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-9
IMAGINARY_RESIDUE_TOL = 1e-10
TOP_EIGENSPACE_TOL = 1e-9
PROJECTION_TOL = 1e-9
STATIONARITY_TOL = 1e-9

Status = str  # 'interior' | 'boundary' | 'infeasible'
INTERIOR = "interior"
BOUNDARY = "boundary"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class MomentVector:
    """Real moment values m_1..m_k.

    Attributes:
        values: Tuple of k floats
    """
    values: Tuple[float, ...]

    def __init__(self, values: Union[Sequence[float], np.ndarray]):
        object.__setattr__(self, "values", tuple(float(v) for v in np.ravel(values)))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


class ConstraintSet:
    """Ordered observables X_1..X_k on C^d.

    Defines the operator system V = span{I, X_1, ..., X_k}. Linear
    independence of {I, X_i} is decided at construction from the rank of
    the trace-inner-product Gram matrix.

    Attributes:
        observables: Tuple of HermitianOperator, all of the same dimension
        names: One label per observable
        linearly_independent: Whether {I, X_1, ..., X_k} is independent
    """

    def __init__(
        self,
        observables: Sequence[HermitianOperator],
        names: Optional[Sequence[str]] = None,
    ):
        """Initialize a constraint set.

        Args:
            observables: Non-empty list of HermitianOperator
            names: Optional labels (default X1..Xk)

        Raises:
            PreconditionViolation: If the list is empty or names mismatch
            DimensionMismatchError: If dimensions differ
        """
        observables = tuple(observables)
        if not observables:
            raise PreconditionViolation("A constraint set needs at least one observable")
        dims = {x.dim for x in observables}
        if len(dims) != 1:
            raise DimensionMismatchError(f"Observables have different dimensions: {sorted(dims)}")
        if names is None:
            names = [f"X{i + 1}" for i in range(len(observables))]
        names = tuple(str(n) for n in names)
        if len(names) != len(observables):
            raise PreconditionViolation(
                f"Got {len(names)} names for {len(observables)} observables"
            )

        self.observables = observables
        self.names = names
        self._stack = np.stack([x.entries for x in observables])
        self._stack.setflags(write=False)

        gram = self.gram_matrix
        w = np.linalg.eigvalsh(gram)
        rank = int(np.sum(w > RANK_TOL * max(1.0, float(w[-1]))))
        self.linearly_independent = rank == self.k + 1

    @property
    def dim(self) -> int:
        return self.observables[0].dim

    @property
    def k(self) -> int:
        return len(self.observables)

    @property
    def stacked(self) -> np.ndarray:
        """Observables as a read-only (k, d, d) array."""
        return self._stack

    @cached_property
    def gram_matrix(self) -> np.ndarray:
        """Gram matrix of {I, X_1..X_k} under (A, B) -> Re tr(AB)."""
        basis = np.concatenate([np.eye(self.dim)[None], self._stack])
        return np.real(np.einsum("iab,jba->ij", basis, basis))

    def hamiltonian(self, lam: Sequence[float]) -> HermitianOperator:
        """H_lambda = sum_i lambda_i X_i."""
        lam = self.check_direction(lam)
        return HermitianOperator(np.tensordot(lam, self._stack, axes=1))

    def check_direction(self, lam: Sequence[float]) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).ravel()
        if lam.shape[0] != self.k:
            raise DimensionMismatchError(f"Expected {self.k} multipliers, got {lam.shape[0]}")
        return lam

    def check_moments(self, m: Union[MomentVector, Sequence[float]]) -> np.ndarray:
        values = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float).ravel()
        if values.shape[0] != self.k:
            raise DimensionMismatchError(f"Expected {self.k} moments, got {values.shape[0]}")
        return values

    def operator_norms(self) -> np.ndarray:
        """Operator norm of each X_i."""
        w = np.linalg.eigvalsh(self._stack)
        return np.max(np.abs(w), axis=1)

    def __repr__(self) -> str:
        return f"ConstraintSet(dim={self.dim}, k={self.k}, names={list(self.names)})"


@dataclass(frozen=True, eq=False)
class FeasibilityVerdict:
    """Outcome of a feasibility test.

    Attributes:
        status: 'interior', 'boundary' or 'infeasible'
        margin: Minimal support-function slack over the unit sphere
        direction: Unit direction attaining the margin
        witness_direction: For infeasible data, a direction lambda* with
            <lambda*, m> - lambda_max(H_lambda*) > 0
        witness_state: For feasible data, a state reproducing m
        witness_solution: The max-entropy solution the witness came from
        affine_degenerate: {I, X_i} is linearly dependent, so M_X is
            lower-dimensional and 'interior' is never reported reliably
        iterations: Subgradient iterations spent
    """
    status: Status
    margin: float
    direction: np.ndarray
    witness_direction: Optional[np.ndarray] = None
    witness_state: Optional[DensityMatrix] = None
    witness_solution: Optional[object] = None
    affine_degenerate: bool = False
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE


@dataclass(frozen=True)
class FeasibilityOptions:
    """Tolerances for the sphere minimization of the support slack."""
    feas_tol: float = 1e-7
    max_iter: int = 5000
    step_scale: float = 1.0
    plateau_window: int = 100
    random_starts: int = 2
    witness_tol: float = 1e-5
    produce_witness: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("feas_tol", "max_iter", "step_scale", "plateau_window", "witness_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.random_starts < 0:
            raise ValueError("random_starts must be nonnegative")


def moment_map(rho: DensityMatrix, constraints: ConstraintSet) -> MomentVector:
    """m_i(rho) = tr(rho X_i).

    Raises:
        DimensionMismatchError: If dimensions differ
        ContractViolation: If an expectation has an imaginary part
            above 1e-10
    """
    if rho.dim != constraints.dim:
        raise DimensionMismatchError(
            f"State has dim {rho.dim}, constraints have dim {constraints.dim}"
        )
    values = np.einsum("ab,iba->i", rho.entries, constraints.stacked)
    residue = float(np.max(np.abs(np.imag(values))))
    if residue > IMAGINARY_RESIDUE_TOL:
        raise ContractViolation(f"Moment has imaginary residue {residue:.3e}")
    return MomentVector(np.real(values))


def support_function(constraints: ConstraintSet, lam: Sequence[float]) -> float:
    """h_{M_X}(lambda) = lambda_max(sum_i lambda_i X_i)."""
    h = constraints.hamiltonian(lam)
    return float(np.linalg.eigvalsh(h.entries)[-1])


def _top_eigenvectors(matrix: np.ndarray) -> Tuple[np.ndarray, float]:
    """Orthonormal basis of the top eigenspace and the largest eigenvalue.

    Eigenvalues within TOP_EIGENSPACE_TOL of the maximum count as top.
    """
    try:
        w, u = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as e:
        raise NumericalBackendError(f"Eigendecomposition did not converge: {e}") from e
    return u[:, w >= w[-1] - TOP_EIGENSPACE_TOL], float(w[-1])


def top_eigenspace_state(hamiltonian: HermitianOperator) -> Tuple[DensityMatrix, float]:
    """Normalized projector onto the top eigenspace of H.

    Its moments are the averaged subgradient of the support function at
    the direction defining H.

    Returns:
        Tuple of (state, lambda_max)
    """
    u, top = _top_eigenvectors(hamiltonian.entries)
    return DensityMatrix(u @ u.conj().T / u.shape[1]), top


def pure_state_moment_cloud(constraints: ConstraintSet, samples: int, seed: int) -> List[MomentVector]:
    """Moment vectors of Haar-random pure states.

    Every point lies in M_X, so the cloud is an inner approximation of the
    moment body. Deterministic for a fixed seed.

    Args:
        constraints: Observables
        samples: Number of pure states (>= 1)
        seed: Random seed

    Returns:
        List of MomentVector
    """
    if samples < 1:
        raise PreconditionViolation("samples must be at least 1")
    rng = np.random.default_rng(seed)
    cloud = []
    for _ in range(samples):
        psi = random_unit_vector(constraints.dim, rng)
        values = np.einsum("a,iab,b->i", psi.conj(), constraints.stacked, psi)
        cloud.append(MomentVector(np.real(values)))
    return cloud


def _slack(stack: np.ndarray, lam: np.ndarray, m: np.ndarray) -> Tuple[float, np.ndarray]:
    """Slack g(lambda) and its averaged top-eigenspace subgradient."""
    u, top = _top_eigenvectors(np.tensordot(lam, stack, axes=1))
    moments = np.real(np.einsum("ar,iab,br->i", u.conj(), stack, u)) / u.shape[1]
    return top - float(lam @ m), moments - m


def _start_directions(constraints: ConstraintSet, m: np.ndarray, opts: FeasibilityOptions) -> List[np.ndarray]:
    k = constraints.k
    starts = []
    centre = np.real(np.einsum("iaa->i", constraints.stacked)) / constraints.dim
    outward = m - centre
    if np.linalg.norm(outward) > 0:
        starts.append(outward)
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        starts.extend([e, -e])
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.random_starts if k > 1 else 0):
        starts.append(rng.standard_normal(k))
    return [s / np.linalg.norm(s) for s in starts]


def _minimize_on_sphere(constraints, m, start, opts):
    """Projected subgradient descent of the slack from one start.

    Runs until the tangential subgradient vanishes or the best value
    stops improving for plateau_window iterations, also after a
    violating direction turns up, so the result is the minimal slack.

    Returns:
        Tuple of (best_value, best_direction, iterations, converged)
    """
    stack = constraints.stacked
    lam = start
    best_value, subgradient = _slack(stack, lam, m)
    best_lam = lam
    last_improvement = 0

    for t in range(1, opts.max_iter + 1):
        tangential = subgradient - (subgradient @ lam) * lam
        if np.linalg.norm(tangential) <= STATIONARITY_TOL or t - last_improvement > opts.plateau_window:
            return best_value, best_lam, t, True

        step = opts.step_scale / math.sqrt(t)
        candidate = lam - step * subgradient
        norm = np.linalg.norm(candidate)
        if norm == 0:
            return best_value, best_lam, t, True
        lam = candidate / norm

        value, subgradient = _slack(stack, lam, m)
        if value < best_value:
            significant = best_value - value > 1e-3 * opts.feas_tol + 1e-6 * abs(best_value)
            best_value, best_lam = value, lam
            if significant:
                last_improvement = t

    return best_value, best_lam, opts.max_iter, False


def check_feasibility(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[FeasibilityOptions] = None,
    solver_options=None,
) -> FeasibilityVerdict:
    """Decide whether m lies in the moment body M_X.

    Minimizes g(lambda) = lambda_max(H_lambda) - <lambda, m> over the unit
    sphere. The verdict is 'infeasible' when min g < -feas_tol, 'boundary'
    when |min g| <= feas_tol and 'interior' otherwise. Feasible verdicts
    carry a witness state from the max-entropy solver.

    Args:
        constraints: Observables
        m: Target moments
        opts: Feasibility tolerances
        solver_options: SolverOptions for the witness solve

    Returns:
        FeasibilityVerdict

    Raises:
        IndeterminateVerdictError: If a start exhausts max_iter without
            certifying infeasibility
        ContractViolation: If a witness fails its consistency check
    """
    opts = opts or FeasibilityOptions()
    target = constraints.check_moments(m)

    best_value = math.inf
    best_lam = None
    total_iterations = 0
    unconverged = False
    for start in _start_directions(constraints, target, opts):
        value, lam, iterations, converged = _minimize_on_sphere(constraints, target, start, opts)
        total_iterations += iterations
        unconverged = unconverged or not converged
        if value < best_value:
            best_value, best_lam = value, lam

    margin = float(best_value)
    logger.debug("Feasibility search: margin=%.3e after %d iterations", margin, total_iterations)

    if margin < -opts.feas_tol:
        violation = float(best_lam @ target) - support_function(constraints, best_lam)
        if not violation > 0:
            raise ContractViolation("Infeasibility witness does not violate the support inequality")
        return FeasibilityVerdict(
            status=INFEASIBLE,
            margin=margin,
            direction=best_lam,
            witness_direction=best_lam,
            affine_degenerate=not constraints.linearly_independent,
            iterations=total_iterations,
        )

    if unconverged:
        raise IndeterminateVerdictError(
            f"Feasibility search did not converge within {opts.max_iter} iterations",
            best_margin=margin,
            best_direction=best_lam,
        )

    status = INTERIOR if margin > opts.feas_tol else BOUNDARY
    witness_state = None
    witness_solution = None
    if opts.produce_witness:
        witness_solution = _solve_witness(constraints, target, status, solver_options)
        witness_state = witness_solution.sigma
        residual = float(np.linalg.norm(moment_map(witness_state, constraints).as_array() - target))
        if residual > opts.witness_tol:
            raise ContractViolation(
                f"Feasible witness misses the target moments by {residual:.3e}"
            )

    return FeasibilityVerdict(
        status=status,
        margin=margin,
        direction=best_lam,
        witness_state=witness_state,
        witness_solution=witness_solution,
        affine_degenerate=not constraints.linearly_independent,
        iterations=total_iterations,
    )


def _solve_witness(constraints, target, status, solver_options):
    # Imported here: the dual solver depends on this module
    from src.core.dual_solver import solve_for_status

    return solve_for_status(constraints, target, status, solver_options)


def _hermitian_basis(dim: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of d x d Hermitian matrices."""
    basis = []
    for a in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[a, a] = 1.0
        basis.append(e)
    for a in range(dim):
        for b in range(a + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[a, b] = sym[b, a] = 1 / math.sqrt(2)
            anti = np.zeros((dim, dim), dtype=complex)
            anti[a, b] = 1j / math.sqrt(2)
            anti[b, a] = -1j / math.sqrt(2)
            basis.extend([sym, anti])
    return np.array(basis)


def _coordinates(matrices: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("iab,jba->ij", matrices, basis))


def moment_preserving_directions(constraints: ConstraintSet) -> List[HermitianOperator]:
    """Orthonormal Hermitian directions Delta with tr(Delta) = 0 and tr(Delta X_i) = 0.

    Moving a state along any of these keeps its moments fixed; the list is
    empty exactly when C(m) is a single point for every feasible m.
    """
    basis = _hermitian_basis(constraints.dim)
    system = np.concatenate([np.eye(constraints.dim)[None], constraints.stacked])
    kernel = null_space(_coordinates(system, basis), rcond=RANK_TOL)
    return [HermitianOperator(np.tensordot(column, basis, axes=1)) for column in kernel.T]


def project_onto_operator_system(
    operator: HermitianOperator, constraints: ConstraintSet
) -> Tuple[np.ndarray, float]:
    """Orthogonal projection of A onto V = span{I, X_i}.

    Returns:
        Tuple of (coefficients on [I, X_1..X_k], Hilbert-Schmidt residual)
    """
    if operator.dim != constraints.dim:
        raise DimensionMismatchError(
            f"Operator has dim {operator.dim}, constraints have dim {constraints.dim}"
        )
    basis = _hermitian_basis(constraints.dim)
    system = np.concatenate([np.eye(constraints.dim)[None], constraints.stacked])
    design = _coordinates(system, basis).T
    target = _coordinates(operator.entries[None], basis)[0]
    coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.linalg.norm(design @ coefficients - target))
    return coefficients, residual
