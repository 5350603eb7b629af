"""Certification of a candidate state against the max-entropy solution.

All bounds compare a state rho with the max-entropy state sigma for
moments m, using the exact identity

    D(rho || sigma) = S(sigma) - S(rho) + <lambda, m(rho) - m>

and the Pinsker inequality ||rho - sigma||_1 <= sqrt(2 D(rho || sigma)).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.dual_solver import GibbsSolution
from src.core.errors import DimensionMismatchError, IdentityUnavailableError, PreconditionViolation
from src.core.hermitian import (
    DensityMatrix,
    HermitianOperator,
    binary_entropy,
    expectation,
    operator_norm,
    relative_entropy,
    trace_norm_distance,
    von_neumann_entropy,
)
from src.core.moments import (
    PROJECTION_TOL,
    ConstraintSet,
    MomentVector,
    moment_map,
    project_onto_operator_system,
)

logger = logging.getLogger(__name__)

BOUND_TOL = 1e-8
OPERATOR_NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CertificateReport:
    """Every certification quantity for one (rho, sigma) pair.

    Fields that need finite multipliers are None for boundary-limit
    solutions and are listed in ``unavailable``; so is the exact Pinsker
    bound when rho does not reproduce the target moments.

    Attributes:
        relative_entropy: D(rho || sigma), math.inf on support violation
        entropy_gap: S(sigma) - S(rho)
        entropy_difference: |S(rho) - S(sigma)|
        moment_mismatch: m(rho) - m
        coupled_gap: gap + lambda . dm
        identity_residual: |D - coupled_gap|
        pinsker_exact_bound: sqrt(2 gap), rho in C(m) only
        pinsker_mixed_bound: sqrt(2 |gap|) + sqrt(2 |lambda| |dm|)
        trace_distance: ||rho - sigma||_1
        fannes_bound: delta ln(d - 1) + h2(delta)
        observable_rate_bound: sqrt(2 max(0, gap + lambda . dm))
        relative_entropy_bound: sqrt(2 D)
        classification: Classification of the solution
        unavailable: Names of the fields left as None
    """
    relative_entropy: float
    entropy_gap: float
    entropy_difference: float
    moment_mismatch: Tuple[float, ...]
    coupled_gap: Optional[float]
    identity_residual: Optional[float]
    pinsker_exact_bound: Optional[float]
    pinsker_mixed_bound: Optional[float]
    trace_distance: float
    fannes_bound: float
    observable_rate_bound: Optional[float]
    relative_entropy_bound: float
    classification: str
    unavailable: Tuple[str, ...] = ()


def _target(solution: GibbsSolution, m: Optional[Union[MomentVector, Sequence[float]]]) -> np.ndarray:
    if m is None:
        return solution.target.as_array()
    values = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float).ravel()
    if values.shape[0] != len(solution.lambda_):
        raise DimensionMismatchError(f"Expected {len(solution.lambda_)} moments, got {values.shape[0]}")
    return values


def _require_interior(solution: GibbsSolution, what: str):
    if not solution.is_interior:
        raise IdentityUnavailableError(f"{what} needs finite multipliers; solution is {solution.classification}")


def _moment_mismatch(rho: DensityMatrix, constraints: ConstraintSet, target: np.ndarray) -> np.ndarray:
    return moment_map(rho, constraints).as_array() - target


def moment_tolerance(solution: GibbsSolution) -> float:
    """Mismatch below which rho counts as a member of C(m)."""
    return max(10 * solution.options.grad_tol, 2 * solution.moment_residual)


def entropy_gap_identity(
    rho: DensityMatrix,
    solution: GibbsSolution,
    constraints: ConstraintSet,
    m: Optional[Union[MomentVector, Sequence[float]]] = None,
) -> Tuple[float, float, float]:
    """Both sides of D(rho || sigma) = S(sigma) - S(rho) + <lambda, m(rho) - m>.

    Args:
        rho: Candidate state
        solution: Interior-converged max-entropy solution
        constraints: Observables the solution was computed for
        m: Target moments (default: the solution's target)

    Returns:
        Tuple of (lhs, rhs, residual)

    Raises:
        IdentityUnavailableError: For boundary-limit solutions
    """
    _require_interior(solution, "The entropy-gap identity")
    target = _target(solution, m)
    lhs = relative_entropy(rho, solution.sigma)
    dm = _moment_mismatch(rho, constraints, target)
    rhs = solution.entropy - von_neumann_entropy(rho) + float(solution.lambda_ @ dm)
    return lhs, rhs, abs(lhs - rhs)


def pinsker_exact_rate(
    rho: DensityMatrix,
    solution: GibbsSolution,
    constraints: ConstraintSet,
    m: Optional[Union[MomentVector, Sequence[float]]] = None,
) -> float:
    """sqrt(2 (S(sigma) - S(rho))) for rho in C(m).

    Raises:
        PreconditionViolation: If rho does not reproduce the moments
    """
    target = _target(solution, m)
    mismatch = float(np.linalg.norm(_moment_mismatch(rho, constraints, target)))
    if mismatch > moment_tolerance(solution):
        raise PreconditionViolation(f"State misses the target moments by {mismatch:.3e}")
    gap = solution.entropy - von_neumann_entropy(rho)
    return math.sqrt(2 * max(0.0, gap))


def pinsker_mixed_rate(
    rho: DensityMatrix,
    solution: GibbsSolution,
    constraints: ConstraintSet,
    m: Optional[Union[MomentVector, Sequence[float]]] = None,
) -> float:
    """sqrt(2 |S(sigma) - S(rho)|) + sqrt(2 ||lambda|| ||m(rho) - m||).

    Raises:
        IdentityUnavailableError: For boundary-limit solutions
    """
    _require_interior(solution, "The mixed Pinsker rate")
    target = _target(solution, m)
    dm = _moment_mismatch(rho, constraints, target)
    gap = solution.entropy - von_neumann_entropy(rho)
    coupling = float(np.linalg.norm(solution.lambda_)) * float(np.linalg.norm(dm))
    return math.sqrt(2 * abs(gap)) + math.sqrt(2 * coupling)


def _observable_radicand(rho, solution, constraints, target) -> float:
    dm = _moment_mismatch(rho, constraints, target)
    gap = solution.entropy - von_neumann_entropy(rho)
    return max(0.0, gap + float(solution.lambda_ @ dm))


def observable_rate(
    rho: DensityMatrix,
    solution: GibbsSolution,
    constraints: ConstraintSet,
    observable: HermitianOperator,
    m: Optional[Union[MomentVector, Sequence[float]]] = None,
) -> Tuple[float, float]:
    """|tr((rho - sigma) A)| against sqrt(2 (gap + lambda . dm)) for A in V.

    Args:
        rho: Candidate state
        solution: Interior-converged solution
        constraints: Observables spanning V together with I
        observable: A with ||A|| <= 1 in span{I, X_i}
        m: Target moments (default: the solution's target)

    Returns:
        Tuple of (lhs, bound)

    Raises:
        PreconditionViolation: If A is outside V or ||A|| > 1
        IdentityUnavailableError: For boundary-limit solutions
    """
    _require_interior(solution, "The observable rate")
    _, residual = project_onto_operator_system(observable, constraints)
    if residual > PROJECTION_TOL:
        raise PreconditionViolation(f"Observable lies outside the operator system (residual {residual:.3e})")
    norm = operator_norm(observable)
    if norm > 1 + OPERATOR_NORM_TOL:
        raise PreconditionViolation(f"Observable has operator norm {norm:.6g} > 1")

    lhs = abs(expectation(rho, observable) - expectation(solution.sigma, observable))
    bound = math.sqrt(2 * _observable_radicand(rho, solution, constraints, _target(solution, m)))
    return lhs, bound


def fannes_audenaert(rho: DensityMatrix, sigma: DensityMatrix) -> Tuple[float, float]:
    """|S(rho) - S(sigma)| and its continuity bound delta ln(d - 1) + h2(delta).

    delta is half the trace distance; for d = 2 the bound reduces to h2(delta).

    Raises:
        PreconditionViolation: If d < 2
    """
    if rho.dim < 2:
        raise PreconditionViolation("The continuity bound needs d >= 2")
    delta = min(trace_norm_distance(rho, sigma) / 2, 1.0)
    difference = abs(von_neumann_entropy(rho) - von_neumann_entropy(sigma))
    bound = delta * math.log(rho.dim - 1) + binary_entropy(delta)
    return difference, bound


def relative_entropy_rate(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """sqrt(2 D(rho || sigma)); math.inf on support violation."""
    divergence = relative_entropy(rho, sigma)
    if math.isinf(divergence):
        return math.inf
    return math.sqrt(2 * divergence)


def certify(
    rho: DensityMatrix,
    solution: GibbsSolution,
    constraints: ConstraintSet,
    m: Optional[Union[MomentVector, Sequence[float]]] = None,
) -> CertificateReport:
    """Collect every bound for rho against the solution.

    Unavailable quantities are reported in-band, never raised.
    """
    if rho.dim != solution.sigma.dim:
        raise DimensionMismatchError(f"State has dim {rho.dim}, solution has dim {solution.sigma.dim}")
    target = _target(solution, m)
    sigma = solution.sigma

    divergence = relative_entropy(rho, sigma)
    entropy_rho = von_neumann_entropy(rho)
    gap = solution.entropy - entropy_rho
    dm = _moment_mismatch(rho, constraints, target)
    distance = trace_norm_distance(rho, sigma)
    difference, fannes = fannes_audenaert(rho, sigma) if rho.dim >= 2 else (0.0, 0.0)

    exact = None
    if float(np.linalg.norm(dm)) <= moment_tolerance(solution):
        exact = math.sqrt(2 * max(0.0, gap))

    coupled = identity = mixed = observable = None
    if solution.is_interior:
        coupled = gap + float(solution.lambda_ @ dm)
        identity = abs(divergence - coupled) if math.isfinite(divergence) else None
        coupling = float(np.linalg.norm(solution.lambda_)) * float(np.linalg.norm(dm))
        mixed = math.sqrt(2 * abs(gap)) + math.sqrt(2 * coupling)
        observable = math.sqrt(2 * max(0.0, coupled))

    values = {
        "coupled_gap": coupled,
        "identity_residual": identity,
        "pinsker_exact_bound": exact,
        "pinsker_mixed_bound": mixed,
        "observable_rate_bound": observable,
    }
    unavailable = tuple(name for name, value in values.items() if value is None)
    if unavailable:
        logger.info("Certificate fields unavailable: %s", ", ".join(unavailable))

    return CertificateReport(
        relative_entropy=divergence,
        entropy_gap=gap,
        entropy_difference=difference,
        moment_mismatch=tuple(float(v) for v in dm),
        coupled_gap=coupled,
        identity_residual=identity,
        pinsker_exact_bound=exact,
        pinsker_mixed_bound=mixed,
        trace_distance=distance,
        fannes_bound=fannes,
        observable_rate_bound=observable,
        relative_entropy_bound=math.sqrt(2 * divergence) if math.isfinite(divergence) else math.inf,
        classification=solution.classification,
        unavailable=unavailable,
    )


def check_contracts(report: CertificateReport, tol: float = BOUND_TOL) -> List[str]:
    """Bound contracts the report violates; an empty list means all hold."""
    violations = []
    if report.identity_residual is not None and report.identity_residual > tol:
        violations.append(f"identity residual {report.identity_residual:.3e} exceeds {tol:.1e}")

    dm_norm = float(np.linalg.norm(report.moment_mismatch))
    radicand_ok = report.coupled_gap is not None and report.coupled_gap >= 0
    checks = [
        ("pinsker_exact_bound", report.pinsker_exact_bound),
        ("pinsker_mixed_bound", report.pinsker_mixed_bound if radicand_ok else None),
        ("relative_entropy_bound", report.relative_entropy_bound),
    ]
    for name, bound in checks:
        if bound is not None and math.isfinite(bound) and report.trace_distance > bound + tol:
            violations.append(
                f"trace distance {report.trace_distance:.6g} exceeds {name} {bound:.6g}"
            )
    if report.entropy_difference > report.fannes_bound + tol:
        violations.append(
            f"entropy difference {report.entropy_difference:.6g} exceeds the continuity bound "
            f"{report.fannes_bound:.6g}"
        )
    if violations:
        logger.warning("Certificate contract violations (|dm|=%.3e): %s", dm_norm, "; ".join(violations))
    return violations


__all__ = [
    "CertificateReport",
    "certify",
    "check_contracts",
    "entropy_gap_identity",
    "fannes_audenaert",
    "moment_tolerance",
    "observable_rate",
    "pinsker_exact_rate",
    "pinsker_mixed_rate",
    "relative_entropy_rate",
]
