"""Command-line entry point for maxent-certify."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add the project root to Python path so 'src' imports work
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

import numpy as np

from src.core.bounds import certify, check_contracts
from src.core.channels import (
    KrausChannel,
    adjoint_norm_check,
    completeness_residual,
    contraction_check,
    duality_gap,
    run_channel_sweep,
)
from src.core.dual_solver import max_entropy
from src.core.errors import (
    DimensionMismatchError,
    HermiticityError,
    InfeasibleMomentsError,
    InvalidStateError,
    MaxEntError,
    ProblemValidationError,
    SelfCheckError,
)
from src.core.harness import SequenceSpec, equivalence_check, generate_sequence, run_convergence
from src.core.hermitian import HermitianOperator, operator_norm, random_density_matrix, random_hermitian
from src.core.moments import INFEASIBLE, check_feasibility
from src.utils.export import export_convergence_csv, export_result
from src.utils.formats import (
    CertificateModel,
    ChannelCheckModel,
    CheckRowModel,
    ResultFile,
    SolutionModel,
    VerdictModel,
    load_channel,
    load_problem,
    load_state,
)
from src.utils.settings import SettingsManager

logger = logging.getLogger("maxent_certify")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
EXIT_SELF_CHECK = 5

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
CHANNEL_CHECK_STATES = 5
CHANNEL_CHECK_TOL = 1e-9


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the documented exit codes."""
    if isinstance(error, SelfCheckError):
        return EXIT_SELF_CHECK
    if isinstance(error, InfeasibleMomentsError):
        return EXIT_INFEASIBLE
    if isinstance(error, (ProblemValidationError, DimensionMismatchError, HermiticityError, InvalidStateError)):
        return EXIT_VALIDATION
    if isinstance(error, MaxEntError):
        return EXIT_SOLVER
    if isinstance(error, (OSError, ValueError)):
        return EXIT_VALIDATION
    return EXIT_SOLVER


def configure_logging(quiet: bool = False, verbose: bool = False):
    """Send log records to standard error at the requested level."""
    level = logging.ERROR if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT, force=True)


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with one subparser per command."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="Tolerance override")
    common.add_argument("--max-iter", type=int, help="Iteration budget override")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--out", type=Path, help="Output file (default: standard output)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="Only log errors")
    verbosity.add_argument("--verbose", action="store_true", help="Log solver iterations")

    parser = argparse.ArgumentParser(
        prog="maxent-certify",
        description="Maximum-entropy states for moment constraints, with certified stability bounds.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    feasibility = commands.add_parser("feasibility", parents=[common], help="Classify the target moments")
    feasibility.add_argument("problem", type=Path)

    solve = commands.add_parser("solve", parents=[common], help="Compute the max-entropy state")
    solve.add_argument("problem", type=Path)

    certify_cmd = commands.add_parser("certify", parents=[common], help="Certify a state against the solution")
    certify_cmd.add_argument("problem", type=Path)
    certify_cmd.add_argument("state", type=Path)

    converge = commands.add_parser("converge", parents=[common], help="Run a convergence experiment")
    converge.add_argument("problem", type=Path)
    converge.add_argument("--kind", default="mix",
                          choices=["mix", "jitter", "boundary", "mix-to-sigma", "moment-jitter", "boundary-approach"])
    converge.add_argument("--n", type=int, default=100, help="Sequence length")
    converge.add_argument("--noise", type=float, default=1.0, help="Noise scale")
    converge.add_argument("--csv-out", type=Path, help="CSV output file (default: --out or standard output)")

    channel = commands.add_parser("channel-check", parents=[common], help="Check channel contraction")
    channel.add_argument("problem", type=Path)
    channel.add_argument("channel", type=Path, nargs="?", help="Channel file (default: random sweep only)")
    channel.add_argument("--trials", type=int, default=100, help="Random Stinespring channels to test")

    return parser


class MaxEntCertifyApp:
    """Runs one subcommand and reports its exit code."""

    def __init__(self, argv: Optional[List[str]] = None):
        """Parse arguments and configure logging.

        Args:
            argv: Command-line arguments (default: sys.argv[1:])
        """
        self.args = build_parser().parse_args(argv)
        configure_logging(self.args.quiet, self.args.verbose)
        self.settings_manager = SettingsManager()

    def _load(self):
        problem = load_problem(self.args.problem)
        self.settings_manager.save_file_options(problem.options)
        self.settings_manager.save_cli_flags(self.args.command, self.args.tol, self.args.max_iter, self.args.seed)
        return problem, problem.constraint_set(), problem.moments()

    def _write(self, result: ResultFile):
        export_result(result, self.args.out)

    def _solve(self, command: str):
        _, constraints, m = self._load()
        try:
            solution = max_entropy(
                constraints,
                m,
                self.settings_manager.restore_solver_options(),
                self.settings_manager.restore_feasibility_options(),
            )
        except InfeasibleMomentsError as e:
            self._write(ResultFile(
                command=command,
                verdict=VerdictModel(
                    status=INFEASIBLE,
                    margin=e.margin,
                    direction=[float(v) for v in e.witness],
                    witness_direction=[float(v) for v in e.witness],
                    affine_degenerate=not constraints.linearly_independent,
                ),
            ))
            raise
        return constraints, m, solution

    def cmd_feasibility(self) -> int:
        _, constraints, m = self._load()
        verdict = check_feasibility(
            constraints,
            m,
            self.settings_manager.restore_feasibility_options(),
            self.settings_manager.restore_solver_options(),
        )
        solution = None
        if verdict.witness_solution is not None:
            solution = SolutionModel.from_solution(verdict.witness_solution)
        self._write(ResultFile(command="feasibility", verdict=VerdictModel.from_verdict(verdict), solution=solution))
        logger.info("Feasibility verdict: %s (margin %.3e)", verdict.status, verdict.margin)
        return EXIT_INFEASIBLE if verdict.status == INFEASIBLE else EXIT_OK

    def cmd_solve(self) -> int:
        _, _, solution = self._solve("solve")
        self._write(ResultFile(command="solve", solution=SolutionModel.from_solution(solution)))
        return EXIT_OK

    def cmd_certify(self) -> int:
        constraints, m, solution = self._solve("certify")
        rho = load_state(self.args.state, dim=constraints.dim)
        report = certify(rho, solution, constraints, m)
        violations = check_contracts(report)
        self._write(ResultFile(
            command="certify",
            solution=SolutionModel.from_solution(solution),
            certificate=CertificateModel.from_report(report, violations),
        ))
        if violations:
            raise SelfCheckError("Certificate bound contracts violated", violations)
        return EXIT_OK

    def cmd_converge(self) -> int:
        constraints, _, solution = self._solve("converge")
        spec = SequenceSpec(
            kind=self.args.kind,
            length=self.args.n,
            noise_scale=self.args.noise,
            seed=self.settings_manager.restore_seed(),
        )
        feasibility_options = self.settings_manager.restore_feasibility_options()
        sequence = generate_sequence(solution, constraints, spec, feasibility_options)
        record = run_convergence(solution, constraints, spec, sequence=sequence)
        export_convergence_csv(record, self.args.csv_out or self.args.out)

        equivalence = equivalence_check(solution, constraints, sequence)
        if not equivalence.holds:
            raise SelfCheckError(
                "Trace-norm closeness fails to control moments or entropy",
                [f"row {n}" for n in equivalence.failing_rows],
            )
        return EXIT_OK

    def _channel_rows(self, channel: KrausChannel, solution, rng) -> List[CheckRowModel]:
        sigma = solution.sigma
        rows = []
        for i in range(CHANNEL_CHECK_STATES):
            rho = random_density_matrix(channel.dim_in, rng)
            lhs, rhs = contraction_check(channel, rho, sigma)
            rows.append(CheckRowModel(check=f"contraction[{i}]", lhs=lhs, rhs=rhs,
                                      holds=lhs <= rhs + CHANNEL_CHECK_TOL))
        for i in range(CHANNEL_CHECK_STATES):
            b = random_hermitian(channel.dim_out, rng)
            b = b.scaled(1.0 / max(operator_norm(b), 1e-300))
            lhs, rhs = adjoint_norm_check(channel, b)
            rows.append(CheckRowModel(check=f"adjoint_norm[{i}]", lhs=lhs, rhs=rhs,
                                      holds=lhs <= rhs + CHANNEL_CHECK_TOL))
            gap = duality_gap(channel, sigma, b)
            rows.append(CheckRowModel(check=f"duality[{i}]", lhs=gap, rhs=0.0, holds=gap <= 1e-10))
        lhs, rhs = adjoint_norm_check(channel, HermitianOperator.identity(channel.dim_out))
        rows.append(CheckRowModel(check="adjoint_norm[identity]", lhs=lhs, rhs=rhs,
                                  holds=lhs <= rhs + CHANNEL_CHECK_TOL))
        return rows

    def cmd_channel_check(self) -> int:
        constraints, _, solution = self._solve("channel-check")
        seed = self.settings_manager.restore_seed()
        report = ChannelCheckModel()
        failures = []

        if self.args.channel is not None:
            channel = load_channel(self.args.channel)
            if channel.dim_in != constraints.dim:
                raise DimensionMismatchError(
                    f"Channel input dim {channel.dim_in} does not match problem dim {constraints.dim}"
                )
            rows = self._channel_rows(channel, solution, np.random.default_rng(seed))
            report = report.model_copy(update=dict(
                dim_in=channel.dim_in,
                dim_out=channel.dim_out,
                completeness_residual=completeness_residual(channel),
                adjoint_unital=channel.adjoint_unital,
                rows=rows,
            ))
            failures.extend(row.check for row in rows if not row.holds)

        if self.args.trials > 0:
            sweep = run_channel_sweep(constraints.dim, self.args.trials, seed)
            report = report.model_copy(update=dict(
                trials=self.args.trials,
                contraction_violations=sweep.contraction_violations,
                adjoint_violations=sweep.adjoint_violations,
                max_duality_gap=sweep.max_duality_gap,
            ))
            if sweep.violations:
                failures.append(f"{sweep.violations} random-channel violations")

        self._write(ResultFile(command="channel-check", channel_check=report))
        if failures:
            raise SelfCheckError("Channel checks failed", failures)
        return EXIT_OK

    def run(self) -> int:
        """Run the selected subcommand.

        Returns:
            Process exit code
        """
        handlers = {
            "feasibility": self.cmd_feasibility,
            "solve": self.cmd_solve,
            "certify": self.cmd_certify,
            "converge": self.cmd_converge,
            "channel-check": self.cmd_channel_check,
        }
        try:
            return handlers[self.args.command]()
        except SelfCheckError as e:
            logger.error("%s: %s", e, "; ".join(e.violations))
            return EXIT_SELF_CHECK
        except (MaxEntError, OSError, ValueError) as e:
            logger.error("%s", e)
            return exit_code_for(e)


def main(argv: Optional[List[str]] = None):
    """Application entry point."""
    app = MaxEntCertifyApp(argv)
    sys.exit(app.run())


if __name__ == "__main__":
    main()
