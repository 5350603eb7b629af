"""Problem, state, channel and result file formats.

Every file is JSON. Matrices are stored as separate real and imaginary
row-major arrays. Floats are written in Python's shortest round-trip form,
infinities as the tokens "inf" / "-inf" and missing values as null.
"""

import json
import math
from pathlib import Path
from typing import Annotated, Any, List, Optional, Union

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, ValidationError, model_validator

from src.core.bounds import CertificateReport
from src.core.channels import KrausChannel
from src.core.dual_solver import GibbsSolution, PathStep
from src.core.errors import MaxEntError, PreconditionViolation, ProblemValidationError
from src.core.hermitian import DensityMatrix, HermitianOperator
from src.core.moments import ConstraintSet, FeasibilityVerdict, MomentVector

SCHEMA_VERSION = "1.0"

# Hermiticity tolerance for matrices read from files
FILE_HERMITICITY_TOL = 1e-8

_FLOAT_TOKENS = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _decode_float(value: Any) -> Any:
    if isinstance(value, str):
        token = value.strip().lower()
        if token in _FLOAT_TOKENS:
            return _FLOAT_TOKENS[token]
    return value


def _encode_float(value: float) -> Union[float, str]:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


# Float that survives a JSON round trip bit for bit, infinities included
LosslessFloat = Annotated[float, BeforeValidator(_decode_float), PlainSerializer(_encode_float, when_used="json")]


class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MatrixModel(_Schema):
    """A complex matrix as real and imaginary row-major arrays."""
    real: List[List[float]]
    imag: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _check_shape(self):
        rows = {len(row) for row in self.real}
        if not self.real or len(rows) != 1 or 0 in rows:
            raise ValueError("matrix rows must be non-empty and of equal length")
        if self.imag is not None and np.shape(self.imag) != np.shape(self.real):
            raise ValueError(f"imag has shape {np.shape(self.imag)}, real has shape {np.shape(self.real)}")
        return self

    @property
    def shape(self):
        return np.shape(self.real)

    def to_array(self) -> np.ndarray:
        real = np.asarray(self.real, dtype=float)
        if self.imag is None:
            return real.astype(complex)
        return real + 1j * np.asarray(self.imag, dtype=float)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "MatrixModel":
        array = np.asarray(array)
        return cls(real=np.real(array).tolist(), imag=np.imag(array).tolist())


class ObservableModel(MatrixModel):
    name: str


class ProblemOptions(_Schema):
    """Per-problem overrides of the solver and feasibility defaults."""
    grad_tol: Optional[float] = Field(default=None, gt=0)
    max_newton_iters: Optional[int] = Field(default=None, gt=0)
    lambda_norm_cap: Optional[float] = Field(default=None, gt=0)
    boundary_path_steps: Optional[int] = Field(default=None, gt=0)
    path_tol: Optional[float] = Field(default=None, gt=0)
    feas_tol: Optional[float] = Field(default=None, gt=0)
    feasibility_max_iter: Optional[int] = Field(default=None, gt=0)
    seed: Optional[int] = None


class ProblemFile(_Schema):
    """Observables X_i on C^dim and target moments m."""
    dim: int = Field(gt=0)
    observables: List[ObservableModel] = Field(min_length=1)
    target_moments: List[LosslessFloat]
    options: ProblemOptions = Field(default_factory=ProblemOptions)

    @model_validator(mode="after")
    def _check_consistency(self):
        if len(self.target_moments) != len(self.observables):
            raise ValueError(
                f"{len(self.target_moments)} target moments for {len(self.observables)} observables"
            )
        for observable in self.observables:
            if observable.shape != (self.dim, self.dim):
                raise ValueError(f"observable {observable.name!r} has shape {observable.shape}, expected dim {self.dim}")
            a = observable.to_array()
            if np.max(np.abs(a - a.conj().T)) > FILE_HERMITICITY_TOL:
                raise ValueError(f"observable {observable.name!r} is not Hermitian")
        if not all(math.isfinite(v) for v in self.target_moments):
            raise ValueError("target moments must be finite")
        return self

    def constraint_set(self) -> ConstraintSet:
        operators = [HermitianOperator(o.to_array(), tol=FILE_HERMITICITY_TOL) for o in self.observables]
        return ConstraintSet(operators, names=[o.name for o in self.observables])

    def moments(self) -> MomentVector:
        return MomentVector(self.target_moments)


class StateFile(MatrixModel):
    def to_density_matrix(self) -> DensityMatrix:
        return DensityMatrix(self.to_array(), tol=FILE_HERMITICITY_TOL)


class ChannelFile(_Schema):
    dim_in: int = Field(gt=0)
    dim_out: int = Field(gt=0)
    kraus: List[MatrixModel] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_shapes(self):
        for j, k in enumerate(self.kraus):
            if k.shape != (self.dim_out, self.dim_in):
                raise ValueError(f"Kraus operator {j} has shape {k.shape}, expected ({self.dim_out}, {self.dim_in})")
        return self

    def to_channel(self) -> KrausChannel:
        try:
            return KrausChannel([k.to_array() for k in self.kraus])
        except PreconditionViolation as e:
            raise ProblemValidationError(f"Invalid channel: {e}") from e

    @classmethod
    def from_channel(cls, channel: KrausChannel) -> "ChannelFile":
        return cls(
            dim_in=channel.dim_in,
            dim_out=channel.dim_out,
            kraus=[MatrixModel.from_array(k) for k in channel.kraus_ops],
        )


class VerdictModel(_Schema):
    status: str
    margin: LosslessFloat
    direction: List[LosslessFloat]
    witness_direction: Optional[List[LosslessFloat]] = None
    affine_degenerate: bool = False
    iterations: int = 0

    @classmethod
    def from_verdict(cls, verdict: FeasibilityVerdict) -> "VerdictModel":
        witness = verdict.witness_direction
        return cls(
            status=verdict.status,
            margin=verdict.margin,
            direction=[float(v) for v in verdict.direction],
            witness_direction=None if witness is None else [float(v) for v in witness],
            affine_degenerate=verdict.affine_degenerate,
            iterations=verdict.iterations,
        )


class PathStepModel(_Schema):
    epsilon: LosslessFloat
    moments: List[LosslessFloat]
    lambda_norm: LosslessFloat
    entropy: LosslessFloat
    step_distance: Optional[LosslessFloat] = None

    @classmethod
    def from_step(cls, step: PathStep) -> "PathStepModel":
        return cls(
            epsilon=step.epsilon,
            moments=list(step.moments),
            lambda_norm=step.lambda_norm,
            entropy=step.entropy,
            step_distance=None if math.isnan(step.step_distance) else step.step_distance,
        )


class SolutionModel(_Schema):
    classification: str
    lambda_: List[LosslessFloat] = Field(alias="lambda")
    sigma: MatrixModel
    log_partition: LosslessFloat
    entropy: LosslessFloat
    target_moments: List[LosslessFloat]
    achieved_moments: List[LosslessFloat]
    moment_residual: LosslessFloat
    iterations: int
    lambda_diverging: bool = False
    path_trace: List[PathStepModel] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @classmethod
    def from_solution(cls, solution: GibbsSolution) -> "SolutionModel":
        return cls(
            classification=solution.classification,
            lambda_=[float(v) for v in solution.lambda_],
            sigma=MatrixModel.from_array(solution.sigma.entries),
            log_partition=solution.log_partition,
            entropy=solution.entropy,
            target_moments=list(solution.target),
            achieved_moments=list(solution.achieved_moments),
            moment_residual=solution.moment_residual,
            iterations=solution.iterations,
            lambda_diverging=solution.lambda_diverging,
            path_trace=[PathStepModel.from_step(s) for s in solution.path_trace],
        )


class CertificateModel(_Schema):
    relative_entropy: LosslessFloat
    entropy_gap: LosslessFloat
    entropy_difference: LosslessFloat
    moment_mismatch: List[LosslessFloat]
    coupled_gap: Optional[LosslessFloat] = None
    identity_residual: Optional[LosslessFloat] = None
    pinsker_exact_bound: Optional[LosslessFloat] = None
    pinsker_mixed_bound: Optional[LosslessFloat] = None
    trace_distance: LosslessFloat
    fannes_bound: LosslessFloat
    observable_rate_bound: Optional[LosslessFloat] = None
    relative_entropy_bound: LosslessFloat
    classification: str
    unavailable: List[str] = Field(default_factory=list)
    violations: List[str] = Field(default_factory=list)

    @classmethod
    def from_report(cls, report: CertificateReport, violations: Optional[List[str]] = None) -> "CertificateModel":
        return cls(
            relative_entropy=report.relative_entropy,
            entropy_gap=report.entropy_gap,
            entropy_difference=report.entropy_difference,
            moment_mismatch=list(report.moment_mismatch),
            coupled_gap=report.coupled_gap,
            identity_residual=report.identity_residual,
            pinsker_exact_bound=report.pinsker_exact_bound,
            pinsker_mixed_bound=report.pinsker_mixed_bound,
            trace_distance=report.trace_distance,
            fannes_bound=report.fannes_bound,
            observable_rate_bound=report.observable_rate_bound,
            relative_entropy_bound=report.relative_entropy_bound,
            classification=report.classification,
            unavailable=list(report.unavailable),
            violations=list(violations or []),
        )


class CheckRowModel(_Schema):
    """One lhs <= rhs comparison."""
    check: str
    lhs: LosslessFloat
    rhs: LosslessFloat
    holds: bool


class ChannelCheckModel(_Schema):
    dim_in: Optional[int] = None
    dim_out: Optional[int] = None
    completeness_residual: Optional[LosslessFloat] = None
    adjoint_unital: Optional[bool] = None
    rows: List[CheckRowModel] = Field(default_factory=list)
    trials: int = 0
    contraction_violations: int = 0
    adjoint_violations: int = 0
    max_duality_gap: LosslessFloat = 0.0


class ResultFile(_Schema):
    """Output of every subcommand except converge."""
    schema_version: str = SCHEMA_VERSION
    command: str
    verdict: Optional[VerdictModel] = None
    solution: Optional[SolutionModel] = None
    certificate: Optional[CertificateModel] = None
    channel_check: Optional[ChannelCheckModel] = None


def _read_json(path: Union[str, Path]) -> Any:
    path = Path(path) if isinstance(path, str) else path
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ProblemValidationError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ProblemValidationError(f"{path} is not valid JSON: {e}") from e


def _validate(model, path: Union[str, Path]):
    try:
        return model.model_validate(_read_json(path))
    except ValidationError as e:
        raise ProblemValidationError(f"{path}: {e}") from e


def load_problem(path: Union[str, Path]) -> ProblemFile:
    """Read and validate a problem file.

    Raises:
        ProblemValidationError: If the file is unreadable, not JSON, or
            fails the schema (non-Hermitian matrix, bad shapes, unknown keys)
    """
    problem = _validate(ProblemFile, path)
    try:
        problem.constraint_set()
    except MaxEntError as e:
        raise ProblemValidationError(f"{path}: {e}") from e
    return problem


def load_state(path: Union[str, Path], dim: Optional[int] = None) -> DensityMatrix:
    """Read a density matrix; dim, when given, must match.

    Raises:
        ProblemValidationError: On read, schema or dimension errors
        InvalidStateError: If the matrix is not a valid state
    """
    state = _validate(StateFile, path)
    if state.shape[0] != state.shape[1] or (dim is not None and state.shape != (dim, dim)):
        raise ProblemValidationError(f"{path}: state has shape {state.shape}, expected dim {dim}")
    return state.to_density_matrix()


def load_channel(path: Union[str, Path]) -> KrausChannel:
    """Read a Kraus channel and check completeness.

    Raises:
        ProblemValidationError: On read or schema errors, or when the Kraus
            operators are not trace preserving
    """
    return _validate(ChannelFile, path).to_channel()


def parse_result(text: str) -> ResultFile:
    return ResultFile.model_validate(json.loads(text))


def serialize_model(model: BaseModel) -> str:
    """Deterministic JSON text for a schema model."""
    return json.dumps(model.model_dump(mode="json", by_alias=True), indent=2) + "\n"
