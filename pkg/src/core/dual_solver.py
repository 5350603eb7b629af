"""Maximum-entropy states through the convex dual problem.

The max-entropy state on C(m) is sigma_lambda = exp(-H_lambda) / Z(lambda),
where lambda minimizes F(lambda) = phi(lambda) + <lambda, m> and
phi(lambda) = ln tr exp(-H_lambda) is the log-partition function. Interior
data is solved by damped Newton; boundary data is reached as the limit of
interior solutions along m_j = (1 - eps_j) m + eps_j m_anchor.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from src.core.errors import (
    BoundarySuspectedError,
    ContractViolation,
    InfeasibleMomentsError,
    NonConvergenceError,
)
from src.core.hermitian import (
    DensityMatrix,
    matrix_exp_shifted,
    maximally_mixed,
    spectral_decomposition,
    trace_norm_distance,
    von_neumann_entropy,
)
from src.core.moments import (
    BOUNDARY,
    INFEASIBLE,
    INTERIOR,
    ConstraintSet,
    FeasibilityOptions,
    MomentVector,
    check_feasibility,
    moment_map,
)

logger = logging.getLogger(__name__)

INTERIOR_CONVERGED = "interior-converged"
BOUNDARY_LIMIT = "boundary-limit"

HESSIAN_PSD_TOL = 1e-9
# Hessian eigenvalues below this (relative) are treated as a null direction
HESSIAN_NULL_TOL = 1e-14
# Regularization kicks in when the Hessian condition drops past this
HESSIAN_SINGULAR_TOL = 1e-10
ARMIJO_MIN_STEP = 1e-12
DIVERGENCE_INCREMENT_TOL = 1e-3


@dataclass(frozen=True)
class SolverOptions:
    """Newton and path-following settings.

    Attributes:
        grad_tol: Stop when ||m - m(sigma_lambda)||_2 falls below this
        max_newton_iters: Newton iteration budget per interior solve
        armijo_c1: Sufficient-decrease constant
        backtrack_factor: Step shrink factor in (0, 1)
        lambda_norm_cap: Multiplier norm treated as boundary divergence
        boundary_path_steps: Length of the schedule eps_j = 2^-j
        path_tol: Stop the path once consecutive states are this close
        interior_anchor: "auto" (moments of I/d) or explicit moments
        hessian_regularization: Ridge added to a near-singular Hessian
    """
    grad_tol: float = 1e-9
    max_newton_iters: int = 200
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    lambda_norm_cap: float = 1e3
    boundary_path_steps: int = 40
    path_tol: float = 1e-7
    interior_anchor: Union[str, Tuple[float, ...]] = "auto"
    hessian_regularization: float = 1e-12

    def __post_init__(self):
        for name in ("grad_tol", "max_newton_iters", "armijo_c1", "lambda_norm_cap",
                     "boundary_path_steps", "path_tol", "hessian_regularization"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.interior_anchor != "auto":
            object.__setattr__(self, "interior_anchor", tuple(float(v) for v in self.interior_anchor))

    def schedule(self, steps: Optional[int] = None) -> List[float]:
        """Geometric path parameters eps_j = 2^-j, j = 1..steps."""
        steps = self.boundary_path_steps if steps is None else steps
        return [2.0 ** -j for j in range(1, steps + 1)]


@dataclass(frozen=True, eq=False)
class PathStep:
    """One interior solve along the boundary path.

    Attributes:
        epsilon: Path parameter eps_j
        moments: Interior target m_j
        lambda_: Multipliers solving m_j
        lambda_norm: ||lambda_j||_2
        entropy: S(sigma_j)
        sigma: Gibbs state sigma_j
        step_distance: ||sigma_j - sigma_{j-1}||_1 (nan for the first step)
        iterations: Newton iterations spent on this step
    """
    epsilon: float
    moments: MomentVector
    lambda_: np.ndarray
    lambda_norm: float
    entropy: float
    sigma: DensityMatrix
    step_distance: float
    iterations: int


@dataclass(frozen=True, eq=False)
class GibbsSolution:
    """The maximum-entropy state for target moments.

    Attributes:
        lambda_: Multipliers (last path iterate for boundary limits)
        sigma: Max-entropy state
        log_partition: phi(lambda)
        achieved_moments: m(sigma)
        moment_residual: ||m(sigma) - target||_2
        entropy: S(sigma)
        classification: 'interior-converged' or 'boundary-limit'
        iterations: Total Newton iterations
        target: Target moments m
        path_trace: Path steps for boundary limits
        lambda_diverging: ||lambda_j|| grew monotonically without settling
        options: SolverOptions the solve ran with
    """
    lambda_: np.ndarray
    sigma: DensityMatrix
    log_partition: float
    achieved_moments: MomentVector
    moment_residual: float
    entropy: float
    classification: str
    iterations: int
    target: MomentVector
    path_trace: Tuple[PathStep, ...] = ()
    lambda_diverging: bool = False
    options: SolverOptions = field(default_factory=SolverOptions)

    @property
    def is_interior(self) -> bool:
        return self.classification == INTERIOR_CONVERGED


def log_partition(constraints: ConstraintSet, lam: Sequence[float]) -> float:
    """phi(lambda) = ln tr exp(-sum_i lambda_i X_i).

    Evaluated on the spectrum of H_lambda with the minimum eigenvalue
    shifted out (logsumexp), so large ||lambda|| does not overflow.
    """
    h = np.linalg.eigvalsh(constraints.hamiltonian(lam).entries)
    return float(logsumexp(-h))


def dual_objective(constraints: ConstraintSet, lam: Sequence[float],
                   m: Union[MomentVector, Sequence[float]]) -> float:
    """F(lambda) = phi(lambda) + <lambda, m>."""
    lam = constraints.check_direction(lam)
    return log_partition(constraints, lam) + float(lam @ constraints.check_moments(m))


def gibbs_state(constraints: ConstraintSet, lam: Sequence[float]) -> DensityMatrix:
    """sigma_lambda = exp(-H_lambda) / tr exp(-H_lambda)."""
    shifted, _ = matrix_exp_shifted(constraints.hamiltonian(lam))
    return DensityMatrix.from_unnormalized(shifted.entries)


def dual_gradient(constraints: ConstraintSet, lam: Sequence[float]) -> np.ndarray:
    """grad phi(lambda) = -m(sigma_lambda)."""
    return -moment_map(gibbs_state(constraints, lam), constraints).as_array()


def _logarithmic_mean(p: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    """L(p_a, p_b) = (p_a - p_b) / (ln p_a - ln p_b), L(p, p) = p."""
    lo = np.minimum.outer(p, p)
    hi = np.maximum.outer(p, p)
    x = np.abs(np.subtract.outer(log_p, log_p))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        near = lo * (1.0 + x / 2.0)
        moderate = lo * np.expm1(x) / x
        far = (hi - lo) / x
    return np.where(x < 1e-8, near, np.where(x > 30.0, far, moderate))


def dual_hessian(constraints: ConstraintSet, lam: Sequence[float]) -> np.ndarray:
    """Kubo-Mori covariance, the Hessian of phi at lambda.

    In the eigenbasis of H_lambda, with sigma eigenvalues p_a,
    Hess_ij = sum_ab L(p_a, p_b) (X_i)_ab (X_j)_ba - m_i m_j.

    Raises:
        ContractViolation: If the result has an eigenvalue below -1e-9
    """
    decomposition = spectral_decomposition(constraints.hamiltonian(lam))
    h = decomposition.eigenvalues
    log_p = -h - logsumexp(-h)
    p = np.exp(log_p)
    u = decomposition.eigenvectors
    rotated = np.einsum("ba,ibc,cd->iad", u.conj(), constraints.stacked, u)
    means = np.real(np.einsum("a,iaa->i", p, rotated))
    weights = _logarithmic_mean(p, log_p)
    hessian = np.real(np.einsum("ab,iab,jab->ij", weights, rotated, rotated.conj()))
    hessian = hessian - np.outer(means, means)
    hessian = (hessian + hessian.T) / 2

    smallest = float(np.linalg.eigvalsh(hessian)[0])
    if smallest < -HESSIAN_PSD_TOL:
        raise ContractViolation(f"Hessian is not positive semidefinite: {smallest:.3e}")
    return hessian


def _newton_step(hessian: np.ndarray, gradient: np.ndarray, opts: SolverOptions) -> np.ndarray:
    """Newton direction for F, min-norm on the Hessian null space."""
    w, v = np.linalg.eigh(hessian)
    scale = max(1.0, float(w[-1]))
    if w[0] > HESSIAN_SINGULAR_TOL * scale:
        return -v @ ((v.T @ gradient) / w)

    keep = w > HESSIAN_NULL_TOL * scale
    logger.debug("Near-singular Hessian (min eigenvalue %.3e), using regularized pseudo-inverse", w[0])
    coefficients = np.zeros_like(w)
    coefficients[keep] = (v[:, keep].T @ gradient) / (w[keep] + opts.hessian_regularization)
    return -v @ coefficients


def _build_solution(constraints, lam, sigma, target, iterations, classification, opts,
                    path_trace=(), lambda_diverging=False) -> GibbsSolution:
    achieved = moment_map(sigma, constraints)
    return GibbsSolution(
        lambda_=np.array(lam, dtype=float),
        sigma=sigma,
        log_partition=log_partition(constraints, lam),
        achieved_moments=achieved,
        moment_residual=float(np.linalg.norm(achieved.as_array() - target)),
        entropy=von_neumann_entropy(sigma),
        classification=classification,
        iterations=iterations,
        target=MomentVector(target),
        path_trace=tuple(path_trace),
        lambda_diverging=lambda_diverging,
        options=opts,
    )


def solve_interior(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[SolverOptions] = None,
    initial_lambda: Optional[Sequence[float]] = None,
) -> GibbsSolution:
    """Newton's method with Armijo backtracking on F(lambda).

    Args:
        constraints: Observables
        m: Target moments, expected in the interior of M_X
        opts: Solver settings
        initial_lambda: Warm start (default lambda = 0, the state I/d)

    Returns:
        Interior-converged GibbsSolution with moment_residual <= grad_tol

    Raises:
        BoundarySuspectedError: If ||lambda|| exceeds lambda_norm_cap
        NonConvergenceError: If max_newton_iters is exhausted
    """
    opts = opts or SolverOptions()
    target = constraints.check_moments(m)
    lam = np.zeros(constraints.k) if initial_lambda is None else constraints.check_direction(initial_lambda).copy()

    best_lam, best_residual = lam, math.inf
    for iteration in range(opts.max_newton_iters + 1):
        sigma = gibbs_state(constraints, lam)
        gradient = target - moment_map(sigma, constraints).as_array()
        residual = float(np.linalg.norm(gradient))
        if residual < best_residual:
            best_lam, best_residual = lam, residual
        logger.debug("Newton iteration %d: residual=%.3e |lambda|=%.3e",
                     iteration, residual, np.linalg.norm(lam))

        if residual <= opts.grad_tol:
            return _build_solution(constraints, lam, sigma, target, iteration, INTERIOR_CONVERGED, opts)
        if iteration == opts.max_newton_iters:
            break

        step = _newton_step(dual_hessian(constraints, lam), gradient, opts)
        value = dual_objective(constraints, lam, target)
        slope = float(gradient @ step)
        slack = 1e-13 * max(1.0, abs(value))
        t = 1.0
        while True:
            candidate = lam + t * step
            if dual_objective(constraints, candidate, target) <= value + opts.armijo_c1 * t * slope + slack:
                break
            t *= opts.backtrack_factor
            if t < ARMIJO_MIN_STEP:
                logger.warning("Armijo backtracking hit its floor at residual %.3e", residual)
                break
        lam = candidate

        if np.linalg.norm(lam) > opts.lambda_norm_cap:
            raise BoundarySuspectedError(
                f"Multiplier norm {np.linalg.norm(lam):.3e} exceeds cap {opts.lambda_norm_cap:.3e}",
                lambda_=lam,
                iterations=iteration + 1,
            )

    raise NonConvergenceError(
        f"Newton did not reach grad_tol={opts.grad_tol:.1e} in {opts.max_newton_iters} iterations",
        best_lambda=best_lam,
        residual=best_residual,
        iterations=opts.max_newton_iters,
    )


def resolve_anchor(constraints: ConstraintSet, opts: SolverOptions) -> np.ndarray:
    """Interior anchor moments; 'auto' means the moments of I/d.

    Raises:
        ContractViolation: If an explicit anchor is not interior
    """
    if opts.interior_anchor == "auto":
        return moment_map(maximally_mixed(constraints.dim), constraints).as_array()
    anchor = constraints.check_moments(opts.interior_anchor)
    verdict = check_feasibility(constraints, anchor, FeasibilityOptions(produce_witness=False))
    if verdict.status != INTERIOR:
        raise ContractViolation(f"Interior anchor is {verdict.status}, not interior")
    return anchor


def iter_boundary_path(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[SolverOptions] = None,
    steps: Optional[int] = None,
    anchor: Optional[Sequence[float]] = None,
) -> Iterator[PathStep]:
    """Yield interior solutions along m_j = (1 - eps_j) m + eps_j m_anchor.

    Each solve is warm-started from the previous multipliers. An explicit
    anchor overrides opts.interior_anchor.

    Raises:
        NonConvergenceError: If an inner solve fails; the steps completed
            so far are attached as path_trace
    """
    opts = opts or SolverOptions()
    target = constraints.check_moments(m)
    if anchor is not None:
        opts = replace(opts, interior_anchor=tuple(anchor))
    anchor = resolve_anchor(constraints, opts)

    lam = np.zeros(constraints.k)
    previous = None
    completed: List[PathStep] = []
    for epsilon in opts.schedule(steps):
        moments = (1.0 - epsilon) * target + epsilon * anchor
        try:
            inner = solve_interior(constraints, moments, opts, initial_lambda=lam)
        except (NonConvergenceError, BoundarySuspectedError) as e:
            raise NonConvergenceError(
                f"Boundary path failed at eps={epsilon:.3e}: {e}",
                best_lambda=lam,
                iterations=sum(s.iterations for s in completed),
                path_trace=completed,
            ) from e

        lam = inner.lambda_
        distance = math.nan if previous is None else trace_norm_distance(inner.sigma, previous)
        step = PathStep(
            epsilon=epsilon,
            moments=MomentVector(moments),
            lambda_=lam,
            lambda_norm=float(np.linalg.norm(lam)),
            entropy=inner.entropy,
            sigma=inner.sigma,
            step_distance=distance,
            iterations=inner.iterations,
        )
        completed.append(step)
        previous = inner.sigma
        yield step


def boundary_path(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[SolverOptions] = None,
    steps: Optional[int] = None,
    anchor: Optional[Sequence[float]] = None,
) -> List[PathStep]:
    """Every step of the boundary path, with no early stop."""
    return list(iter_boundary_path(constraints, m, opts, steps, anchor))


def lambda_diverging(path: Sequence[PathStep], opts: SolverOptions) -> bool:
    """Whether ||lambda_j|| grows monotonically along the path without settling.

    Growth counts as divergence once the norm passes lambda_norm_cap / 10,
    or while the last increment stays above DIVERGENCE_INCREMENT_TOL.
    """
    norms = [s.lambda_norm for s in path]
    if len(norms) < 3 or not all(b > a for a, b in zip(norms, norms[1:])):
        return False
    return norms[-1] > opts.lambda_norm_cap / 10 or norms[-1] - norms[-2] > DIVERGENCE_INCREMENT_TOL


def _limit_state(path: Sequence[PathStep], opts: SolverOptions) -> DensityMatrix:
    """Last path state with its vanishing eigenvalues removed.

    An eigenvalue vanishes when it is below 10 * path_tol and still
    shrinking from the previous path state.
    """
    last = path[-1].sigma
    if len(path) < 2:
        return last
    current = last.eigenvalues
    previous = path[-2].sigma.eigenvalues
    vanishing = (current <= 10 * opts.path_tol) & (current < previous)
    if not np.any(vanishing) or np.all(vanishing):
        return last
    kept = np.where(vanishing, 0.0, current)
    logger.debug("Truncating %d vanishing eigenvalues of the limit state", int(np.sum(vanishing)))
    return DensityMatrix.from_unnormalized(last.spectrum.reconstruct(kept))


def solve_boundary(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[SolverOptions] = None,
) -> GibbsSolution:
    """Max-entropy state for boundary data as a limit of Gibbs states.

    Follows the path until consecutive states are within path_tol in
    trace norm or the schedule is exhausted. Target data equal to the
    anchor is routed to solve_interior.

    Returns:
        Boundary-limit GibbsSolution whose sigma is the last path state
        with its vanishing spectrum truncated
    """
    opts = opts or SolverOptions()
    target = constraints.check_moments(m)
    anchor = resolve_anchor(constraints, opts)
    if np.linalg.norm(target - anchor) <= opts.grad_tol:
        return solve_interior(constraints, target, opts)

    steps: List[PathStep] = []
    for step in iter_boundary_path(constraints, target, opts):
        steps.append(step)
        if step.step_distance <= opts.path_tol:
            break
    else:
        logger.warning("Boundary path schedule exhausted after %d steps", len(steps))

    diverging = lambda_diverging(steps, opts)
    last = steps[-1]
    sigma = _limit_state(steps, opts)
    logger.info("Boundary limit after %d path steps: |lambda|=%.3e S=%.3e",
                len(steps), last.lambda_norm, last.entropy)
    return _build_solution(
        constraints,
        last.lambda_,
        sigma,
        target,
        sum(s.iterations for s in steps),
        BOUNDARY_LIMIT,
        opts,
        path_trace=steps,
        lambda_diverging=diverging,
    )


def solve_for_status(constraints: ConstraintSet, target: np.ndarray, status: str,
                     opts: Optional[SolverOptions] = None) -> GibbsSolution:
    """Route feasible data to the interior or boundary solver."""
    if status == INTERIOR:
        try:
            return solve_interior(constraints, target, opts)
        except BoundarySuspectedError:
            logger.warning("Interior solve ran past the multiplier cap, following the boundary path")
    return solve_boundary(constraints, target, opts)


def max_entropy(
    constraints: ConstraintSet,
    m: Union[MomentVector, Sequence[float]],
    opts: Optional[SolverOptions] = None,
    feasibility_options: Optional[FeasibilityOptions] = None,
) -> GibbsSolution:
    """The unique maximum-entropy state on C(m).

    Raises:
        InfeasibleMomentsError: If m lies outside M_X; carries the
            violating direction
    """
    target = constraints.check_moments(m)
    feasibility_options = replace(feasibility_options or FeasibilityOptions(), produce_witness=False)
    verdict = check_feasibility(constraints, target, feasibility_options)
    if verdict.status == INFEASIBLE:
        raise InfeasibleMomentsError(
            f"Target moments are infeasible (margin {verdict.margin:.3e})",
            witness=verdict.witness_direction,
            margin=verdict.margin,
        )
    logger.info("Feasibility verdict: %s (margin %.3e)", verdict.status, verdict.margin)
    return solve_for_status(constraints, target, verdict.status, opts)


def entropy_supremum(solution: GibbsSolution) -> float:
    """Legendre dual value -inf_lambda F(lambda), i.e. sup S over C(m).

    For interior solutions this is phi(lambda) + <lambda, m>; for boundary
    limits the entropy of the limit state is reported.
    """
    if solution.is_interior:
        return solution.log_partition + float(solution.lambda_ @ solution.target.as_array())
    return solution.entropy


__all__ = [
    "BOUNDARY",
    "BOUNDARY_LIMIT",
    "INTERIOR_CONVERGED",
    "GibbsSolution",
    "PathStep",
    "SolverOptions",
    "dual_gradient",
    "dual_hessian",
    "dual_objective",
    "entropy_supremum",
    "gibbs_state",
    "boundary_path",
    "iter_boundary_path",
    "lambda_diverging",
    "log_partition",
    "max_entropy",
    "resolve_anchor",
    "solve_boundary",
    "solve_for_status",
    "solve_interior",
]
