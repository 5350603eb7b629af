"""Finite-scale convergence experiments around a max-entropy state.

Sequences rho_n are generated whose moments and entropies approach those of
sigma, and the record tracks ||rho_n - sigma||_1 next to the certified
bounds. An adversarial sequence with fixed moments but an entropy deficit
shows that moment convergence alone does not force convergence to sigma.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.bounds import fannes_audenaert
from src.core.channels import KrausChannel, apply, contraction_check, dual_norm_witness, adjoint_apply
from src.core.dual_solver import GibbsSolution, PathStep, boundary_path, max_entropy, solve_interior
from src.core.errors import (
    InfeasibleMomentsError,
    PreconditionViolation,
    SelfCheckError,
)
from src.core.hermitian import (
    DensityMatrix,
    HermitianOperator,
    maximally_mixed,
    mix,
    operator_norm,
    random_density_matrix,
    random_hermitian,
    relative_entropy,
    trace_norm_distance,
    von_neumann_entropy,
)
from src.core.moments import (
    ConstraintSet,
    FeasibilityOptions,
    moment_map,
    moment_preserving_directions,
)

logger = logging.getLogger(__name__)

MIX_TO_SIGMA = "mix-to-sigma"
MOMENT_JITTER = "moment-jitter"
BOUNDARY_APPROACH = "boundary-approach"
KIND_ALIASES = {
    "mix": MIX_TO_SIGMA,
    "jitter": MOMENT_JITTER,
    "boundary": BOUNDARY_APPROACH,
    MIX_TO_SIGMA: MIX_TO_SIGMA,
    MOMENT_JITTER: MOMENT_JITTER,
    BOUNDARY_APPROACH: BOUNDARY_APPROACH,
}

JITTER_RESAMPLE_LIMIT = 50
ROW_BOUND_TOL = 1e-8
MOMENT_TRANSFER_TOL = 1e-10
ENTROPY_TRANSFER_TOL = 1e-8
MIX_THRESHOLD_SLACK = 1e-12
SURROGATE_WINDOW = 5


@dataclass(frozen=True)
class SequenceSpec:
    """Recipe for a state sequence.

    Attributes:
        kind: 'mix-to-sigma', 'moment-jitter' or 'boundary-approach'
            (aliases 'mix', 'jitter', 'boundary')
        length: Number of states N (>= 1)
        noise_scale: t_n = noise_scale / n for mixing, jitter radius
            noise_scale / n for moment jitter
        seed: Random seed
    """
    kind: str
    length: int
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KIND_ALIASES:
            raise PreconditionViolation(f"Unknown sequence kind: {self.kind!r}")
        object.__setattr__(self, "kind", KIND_ALIASES[self.kind])
        if self.length < 1:
            raise PreconditionViolation("Sequence length must be at least 1")
        if self.noise_scale < 0:
            raise PreconditionViolation("noise_scale must be nonnegative")
        if self.kind == MIX_TO_SIGMA and self.noise_scale > 1:
            raise PreconditionViolation("Mixing weights noise_scale / n need noise_scale <= 1")

    def schedule(self) -> np.ndarray:
        """noise_scale / n for n = 1..N."""
        return self.noise_scale / np.arange(1, self.length + 1)


@dataclass(frozen=True)
class ConvergenceRow:
    """Distances and bounds for one rho_n.

    pinsker_mixed_bound and identity_residual are None when sigma is a
    boundary limit; relative_entropy may be math.inf.
    """
    n: int
    moment_error: float
    entropy_gap: float
    relative_entropy: float
    trace_distance: float
    pinsker_mixed_bound: Optional[float]
    identity_residual: Optional[float]
    coupled_gap: Optional[float] = None

    @property
    def bound_applies(self) -> bool:
        return (
            self.pinsker_mixed_bound is not None
            and math.isfinite(self.pinsker_mixed_bound)
            and self.coupled_gap is not None
            and self.coupled_gap >= 0
        )


@dataclass(frozen=True)
class ConvergenceRecord:
    """All rows of a convergence run plus the asserted final threshold."""
    spec: SequenceSpec
    rows: Tuple[ConvergenceRow, ...]
    final_threshold: float
    classification: str

    @property
    def final_distance(self) -> float:
        return self.rows[-1].trace_distance

    def column(self, name: str) -> List[Optional[float]]:
        return [getattr(row, name) for row in self.rows]

    def bound_violations(self, tol: float = ROW_BOUND_TOL) -> List[int]:
        """Rows n where the trace distance exceeds the mixed Pinsker bound."""
        return [
            row.n for row in self.rows
            if row.bound_applies and row.trace_distance > row.pinsker_mixed_bound + tol
        ]


def _jittered_solution(solution, constraints, base, radius, rng, feasibility_options):
    last_error = None
    for attempt in range(JITTER_RESAMPLE_LIMIT):
        direction = rng.standard_normal(constraints.k)
        direction /= np.linalg.norm(direction)
        try:
            return max_entropy(constraints, base + radius * direction, solution.options, feasibility_options)
        except InfeasibleMomentsError as e:
            last_error = e
            logger.warning("Jittered moments infeasible (attempt %d), resampling direction", attempt + 1)
    raise InfeasibleMomentsError(
        f"No feasible jitter direction in {JITTER_RESAMPLE_LIMIT} tries",
        witness=last_error.witness,
        margin=last_error.margin,
    )


def generate_sequence(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    spec: SequenceSpec,
    feasibility_options: Optional[FeasibilityOptions] = None,
) -> List[DensityMatrix]:
    """Build rho_1..rho_N for the given spec; deterministic per seed.

    mix-to-sigma: rho_n = (1 - t_n) sigma + t_n tau_n with Ginibre tau_n.
    moment-jitter: max-entropy states for m + (noise_scale / n) u_n, with
    random unit directions u_n resampled when infeasible.
    boundary-approach: the boundary path states sigma_1..sigma_N.

    Raises:
        InfeasibleMomentsError: If no feasible jitter direction is found
    """
    rng = np.random.default_rng(spec.seed)
    sigma = solution.sigma

    if spec.kind == MIX_TO_SIGMA:
        sequence = []
        for t in spec.schedule():
            tau = random_density_matrix(sigma.dim, rng)
            sequence.append(mix([sigma, tau], [1.0 - t, t]))
        return sequence

    if spec.kind == MOMENT_JITTER:
        base = solution.target.as_array()
        return [
            _jittered_solution(solution, constraints, base, radius, rng, feasibility_options).sigma
            for radius in spec.schedule()
        ]

    path = boundary_path(constraints, solution.target, solution.options, steps=spec.length)
    return [step.sigma for step in path]


def _row(n, rho, solution, constraints, target, sigma_entropy) -> ConvergenceRow:
    sigma = solution.sigma
    dm = moment_map(rho, constraints).as_array() - target
    gap = sigma_entropy - von_neumann_entropy(rho)
    divergence = relative_entropy(rho, sigma)

    mixed = identity = coupled = None
    if solution.is_interior:
        coupled = gap + float(solution.lambda_ @ dm)
        coupling = float(np.linalg.norm(solution.lambda_)) * float(np.linalg.norm(dm))
        mixed = math.sqrt(2 * abs(gap)) + math.sqrt(2 * coupling)
        if math.isfinite(divergence):
            identity = abs(divergence - coupled)

    return ConvergenceRow(
        n=n,
        moment_error=float(np.linalg.norm(dm)),
        entropy_gap=gap,
        relative_entropy=divergence,
        trace_distance=trace_norm_distance(rho, sigma),
        pinsker_mixed_bound=mixed,
        identity_residual=identity,
        coupled_gap=coupled,
    )


def anchor_state(constraints: ConstraintSet, solution: GibbsSolution) -> DensityMatrix:
    """State at the boundary path anchor: I/d, or the Gibbs state of explicit anchor moments."""
    anchor = solution.options.interior_anchor
    if anchor == "auto":
        return maximally_mixed(constraints.dim)
    return solve_interior(constraints, anchor, solution.options).sigma


def boundary_path_bound(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    rho: DensityMatrix,
    epsilon: float,
) -> float:
    """Bound on ||rho - sigma||_1 for the path state rho at parameter epsilon.

    Pinsker and the triangle inequality through
    tau = (1 - epsilon) sigma + epsilon sigma_anchor give
    ||rho - sigma||_1 <= sqrt(2 D(tau || rho)) + epsilon ||sigma_anchor - sigma||_1.
    tau has the path moments m_epsilon, so D(tau || rho) vanishes as rho
    approaches the max-entropy state for m_epsilon. Infinite when rho is
    singular on the support of tau.
    """
    sigma = solution.sigma
    anchor = anchor_state(constraints, solution)
    tau = mix([sigma, anchor], [1.0 - epsilon, epsilon])
    divergence = relative_entropy(tau, rho)
    return math.sqrt(2 * max(0.0, divergence)) + epsilon * trace_norm_distance(anchor, sigma)


def final_threshold(spec: SequenceSpec, last: ConvergenceRow, path_bound: Optional[float] = None) -> float:
    """Asserted bound on ||rho_N - sigma||_1.

    Mixing uses the convexity rate 2 t_N. Other kinds use Pinsker on the
    last state and, for boundary approaches, the path bound at
    eps_N = 2^-N; the smaller finite bound wins.
    """
    if spec.kind == MIX_TO_SIGMA:
        return 2 * spec.noise_scale / spec.length + MIX_THRESHOLD_SLACK
    candidates = []
    if math.isfinite(last.relative_entropy):
        candidates.append(math.sqrt(2 * last.relative_entropy))
    if path_bound is not None and math.isfinite(path_bound):
        candidates.append(path_bound)
    if not candidates:
        return math.inf
    return min(candidates) + ROW_BOUND_TOL


def run_convergence(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    spec: SequenceSpec,
    sequence: Optional[Sequence[DensityMatrix]] = None,
    feasibility_options: Optional[FeasibilityOptions] = None,
) -> ConvergenceRecord:
    """Evaluate every record column along a sequence and assert convergence.

    Args:
        solution: Max-entropy solution sigma
        constraints: Observables
        spec: Sequence recipe (also used for the final threshold)
        sequence: Precomputed states (default: generate_sequence(spec))
        feasibility_options: Options for jitter feasibility tests

    Returns:
        ConvergenceRecord with one row per state

    Raises:
        SelfCheckError: If a row breaks bound domination or the final
            distance exceeds the threshold
    """
    if sequence is None:
        sequence = generate_sequence(solution, constraints, spec, feasibility_options)
    target = solution.target.as_array()
    sigma_entropy = von_neumann_entropy(solution.sigma)
    rows = tuple(
        _row(n, rho, solution, constraints, target, sigma_entropy)
        for n, rho in enumerate(sequence, start=1)
    )
    path_bound = None
    if spec.kind == BOUNDARY_APPROACH:
        epsilon = solution.options.schedule(len(rows))[-1]
        path_bound = boundary_path_bound(solution, constraints, sequence[-1], epsilon)
    record = ConvergenceRecord(
        spec=spec,
        rows=rows,
        final_threshold=final_threshold(spec, rows[-1], path_bound),
        classification=solution.classification,
    )
    logger.info("Convergence run %s: N=%d final distance %.3e (threshold %.3e)",
                spec.kind, len(rows), record.final_distance, record.final_threshold)

    violations = [f"row {n}: trace distance exceeds the mixed Pinsker bound" for n in record.bound_violations()]
    if record.final_distance > record.final_threshold:
        violations.append(
            f"final trace distance {record.final_distance:.6g} exceeds {record.final_threshold:.6g}"
        )
    if violations:
        raise SelfCheckError("Convergence record violates its bounds", violations)
    return record


@dataclass(frozen=True)
class EquivalenceRow:
    """Forward-direction checks for one rho_n.

    Attributes:
        n: Index
        trace_distance: ||rho_n - sigma||_1
        moment_slack: min_i (||rho_n - sigma||_1 ||X_i|| - |m_i(rho_n) - m_i(sigma)|)
        entropy_difference: |S(rho_n) - S(sigma)|
        fannes_bound: Continuity bound at ||rho_n - sigma||_1
    """
    n: int
    trace_distance: float
    moment_slack: float
    entropy_difference: float
    fannes_bound: float

    @property
    def holds(self) -> bool:
        return (
            self.moment_slack >= -MOMENT_TRANSFER_TOL
            and self.entropy_difference <= self.fannes_bound + ENTROPY_TRANSFER_TOL
        )


@dataclass(frozen=True)
class EquivalenceVerdict:
    rows: Tuple[EquivalenceRow, ...]

    @property
    def holds(self) -> bool:
        return all(row.holds for row in self.rows)

    @property
    def failing_rows(self) -> List[int]:
        return [row.n for row in self.rows if not row.holds]


def equivalence_check(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    sequence: Sequence[DensityMatrix],
) -> EquivalenceVerdict:
    """Check that trace-norm closeness controls moments and entropy rowwise.

    |m_i(rho_n) - m_i(sigma)| <= ||rho_n - sigma||_1 ||X_i|| and
    |S(rho_n) - S(sigma)| <= the Fannes-Audenaert bound.
    """
    sigma = solution.sigma
    sigma_moments = moment_map(sigma, constraints).as_array()
    norms = constraints.operator_norms()
    rows = []
    for n, rho in enumerate(sequence, start=1):
        distance = trace_norm_distance(rho, sigma)
        moment_gaps = np.abs(moment_map(rho, constraints).as_array() - sigma_moments)
        if sigma.dim >= 2:
            difference, bound = fannes_audenaert(rho, sigma)
        else:
            difference, bound = 0.0, 0.0
        rows.append(EquivalenceRow(
            n=n,
            trace_distance=distance,
            moment_slack=float(np.min(distance * norms - moment_gaps)),
            entropy_difference=difference,
            fannes_bound=bound,
        ))
    verdict = EquivalenceVerdict(rows=tuple(rows))
    if not verdict.holds:
        logger.warning("Equivalence inequalities fail at rows %s", verdict.failing_rows)
    return verdict


def constraint_set_samples(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    count: int,
    rng: np.random.Generator,
) -> List[DensityMatrix]:
    """States in C(m) obtained by moving sigma along moment-preserving directions.

    Each sample is sigma + s * Delta with Delta a random unit-operator-norm
    combination of the moment-preserving directions and s uniform in
    (0, lambda_min(sigma)). Returns an empty list when C(m) is a singleton
    or sigma is singular.
    """
    directions = moment_preserving_directions(constraints)
    sigma = solution.sigma
    floor = float(sigma.eigenvalues[0])
    if not directions or floor <= 0:
        return []
    samples = []
    for _ in range(count):
        weights = rng.standard_normal(len(directions))
        delta = sum(w * d.entries for w, d in zip(weights, directions))
        delta = delta / operator_norm(HermitianOperator(delta))
        step = rng.uniform(0.0, floor)
        samples.append(DensityMatrix(sigma.entries + step * delta))
    return samples


def adversarial_sequence(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    length: int,
) -> Optional[List[DensityMatrix]]:
    """States with moments fixed at m(sigma) whose entropy stays below S(sigma).

    rho_a = sigma + t Delta and rho_b = sigma - t Delta with Delta a
    moment-preserving direction of unit operator norm and
    t = lambda_min(sigma) / 2; rho_n = (1 - c_n) rho_a + c_n rho_b with
    c_n = 1 / (n + 2), which converges to rho_a != sigma.

    Returns:
        The sequence, or None when C(m) is a singleton or sigma is singular
    """
    directions = moment_preserving_directions(constraints)
    sigma = solution.sigma
    t = float(sigma.eigenvalues[0]) / 2
    if not directions:
        logger.info("C(m) is a single point; no adversarial sequence exists")
        return None
    if t <= 0:
        logger.info("Max-entropy state is singular; adversarial sequence skipped")
        return None

    delta = directions[0].entries / operator_norm(directions[0])
    rho_a = DensityMatrix(sigma.entries + t * delta)
    rho_b = DensityMatrix(sigma.entries - t * delta)
    return [mix([rho_a, rho_b], [1 - 1 / (n + 2), 1 / (n + 2)]) for n in range(1, length + 1)]


@dataclass(frozen=True)
class NecessityResult:
    """Outcome along the adversarial sequence.

    Attributes:
        min_trace_distance: Smallest ||rho_n - sigma||_1
        min_entropy_gap: Smallest S(sigma) - S(rho_n)
        max_moment_error: Largest ||m(rho_n) - m(sigma)||_2
    """
    min_trace_distance: float
    min_entropy_gap: float
    max_moment_error: float


def necessity_check(
    solution: GibbsSolution,
    constraints: ConstraintSet,
    length: int = 100,
) -> Optional[NecessityResult]:
    """Show that matching moments without the entropy limit does not force convergence.

    Returns:
        NecessityResult, or None when no adversarial sequence exists
    """
    sequence = adversarial_sequence(solution, constraints, length)
    if sequence is None:
        return None
    sigma = solution.sigma
    sigma_entropy = von_neumann_entropy(sigma)
    sigma_moments = moment_map(sigma, constraints).as_array()
    result = NecessityResult(
        min_trace_distance=min(trace_norm_distance(rho, sigma) for rho in sequence),
        min_entropy_gap=min(sigma_entropy - von_neumann_entropy(rho) for rho in sequence),
        max_moment_error=max(
            float(np.linalg.norm(moment_map(rho, constraints).as_array() - sigma_moments))
            for rho in sequence
        ),
    )
    logger.info("Adversarial sequence keeps trace distance >= %.3e with entropy gap >= %.3e",
                result.min_trace_distance, result.min_entropy_gap)
    return result


@dataclass(frozen=True)
class BoundarySurrogate:
    """Consecutive-state diagnostics over the end of a boundary path.

    The mixed limit over path index and sequence index has no canonical
    finite form; this uses final-window maxima of consecutive relative
    entropies and trace distances.

    Attributes:
        relative_entropies: D(sigma_{j+1} || sigma_j) for each j
        trace_distances: ||sigma_{j+1} - sigma_j||_1 for each j
        window: Number of trailing pairs in the maxima
        window_max_relative_entropy: Max over the final window
        window_max_trace_distance: Max over the final window
        label: Description of the truncation used
    """
    relative_entropies: Tuple[float, ...]
    trace_distances: Tuple[float, ...]
    window: int
    window_max_relative_entropy: float
    window_max_trace_distance: float
    label: str = "final-window maxima over consecutive path states"


def boundary_surrogate(path: Sequence[PathStep], window: int = SURROGATE_WINDOW) -> BoundarySurrogate:
    """Consecutive relative entropies and distances along a boundary path.

    Raises:
        PreconditionViolation: If the path has fewer than two steps
    """
    if len(path) < 2:
        raise PreconditionViolation("A surrogate needs at least two path steps")
    pairs = list(zip(path, path[1:]))
    divergences = tuple(relative_entropy(b.sigma, a.sigma) for a, b in pairs)
    distances = tuple(trace_norm_distance(b.sigma, a.sigma) for a, b in pairs)
    window = max(1, min(window, len(pairs)))
    return BoundarySurrogate(
        relative_entropies=divergences,
        trace_distances=distances,
        window=window,
        window_max_relative_entropy=max(divergences[-window:]),
        window_max_trace_distance=max(distances[-window:]),
    )


@dataclass(frozen=True)
class TransferRow:
    """Channel checks for one rho_n.

    Attributes:
        n: Index
        input_distance: ||rho_n - sigma||_1
        output_distance: ||Phi(rho_n) - Phi(sigma)||_1
        observable_transfer: sup over tested ||B|| <= 1 of |tr((rho_n - sigma) Phi*(B))|
    """
    n: int
    input_distance: float
    output_distance: float
    observable_transfer: float

    @property
    def holds(self) -> bool:
        return (
            self.output_distance <= self.input_distance + 1e-9
            and self.observable_transfer <= self.input_distance + 1e-9
        )


def channel_transfer_check(
    channel: KrausChannel,
    sequence: Sequence[DensityMatrix],
    sigma: DensityMatrix,
    rng: Optional[np.random.Generator] = None,
    samples: int = 10,
) -> List[TransferRow]:
    """Stability and observable transfer of a convergent sequence through Phi.

    The observable supremum combines sampled contractions B (when rng is
    given) with the analytic maximizer sign(Phi(rho_n) - Phi(sigma)).
    """
    sigma_out = apply(channel, sigma)
    rows = []
    for n, rho in enumerate(sequence, start=1):
        output_distance, input_distance = contraction_check(channel, rho, sigma)
        difference = rho.entries - sigma.entries
        witness = dual_norm_witness(apply(channel, rho).entries - sigma_out.entries)
        candidates = [witness]
        if rng is not None:
            for _ in range(samples):
                b = random_hermitian(channel.dim_out, rng)
                candidates.append(b.scaled(1.0 / max(operator_norm(b), 1e-300)))
        transfer = max(
            float(abs(np.trace(difference @ adjoint_apply(channel, b).entries))) for b in candidates
        )
        rows.append(TransferRow(n, input_distance, output_distance, transfer))
    failing = [row.n for row in rows if not row.holds]
    if failing:
        logger.warning("Channel transfer fails at rows %s", failing)
    return rows


__all__ = [
    "BOUNDARY_APPROACH",
    "MIX_TO_SIGMA",
    "MOMENT_JITTER",
    "BoundarySurrogate",
    "ConvergenceRecord",
    "ConvergenceRow",
    "EquivalenceRow",
    "EquivalenceVerdict",
    "NecessityResult",
    "SequenceSpec",
    "TransferRow",
    "adversarial_sequence",
    "anchor_state",
    "boundary_path_bound",
    "boundary_surrogate",
    "channel_transfer_check",
    "constraint_set_samples",
    "equivalence_check",
    "final_threshold",
    "generate_sequence",
    "necessity_check",
    "run_convergence",
]
