"""Settings manager resolving solver options from defaults, files and flags."""

import logging
from dataclasses import fields
from typing import Any, Dict, Optional

from src.core.dual_solver import SolverOptions
from src.core.moments import FeasibilityOptions
from src.utils.formats import ProblemOptions

logger = logging.getLogger(__name__)

# ProblemFile option keys that map onto FeasibilityOptions under another name
_FEASIBILITY_KEYS = {
    "feas_tol": "feas_tol",
    "feasibility_max_iter": "max_iter",
    "seed": "seed",
}


class SettingsManager:
    """Resolves option objects from layered settings.

    Precedence, lowest to highest: library defaults, the problem file's
    options block, command-line flags. Each layer only holds the keys it
    sets.
    """

    def __init__(self):
        """Initialize the settings manager with empty layers."""
        self._file: Dict[str, Any] = {}
        self._flags: Dict[str, Any] = {}

    # File Settings

    def save_file_options(self, options: Optional[ProblemOptions]):
        """Store the options block of a problem file.

        Args:
            options: Parsed ProblemOptions (None clears the layer)
        """
        self._file = {} if options is None else options.model_dump(exclude_none=True)

    # Command-line Settings

    def save_cli_flags(
        self,
        command: str,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        seed: Optional[int] = None,
    ):
        """Store the global --tol, --max-iter and --seed flags.

        For the feasibility command --tol and --max-iter address the
        feasibility search; otherwise they address the Newton solver.

        Args:
            command: Subcommand name
            tol: Tolerance override
            max_iter: Iteration budget override
            seed: Random seed override
        """
        flags: Dict[str, Any] = {}
        if command == "feasibility":
            flags.update(feas_tol=tol, feasibility_max_iter=max_iter)
        else:
            flags.update(grad_tol=tol, max_newton_iters=max_iter)
        flags["seed"] = seed
        self._flags = {key: value for key, value in flags.items() if value is not None}

    def _value(self, key: str, default: Any) -> Any:
        if key in self._flags:
            return self._flags[key]
        return self._file.get(key, default)

    # Resolved options

    def restore_solver_options(self) -> SolverOptions:
        """Fully populated SolverOptions for the current layers."""
        defaults = SolverOptions()
        values = {f.name: self._value(f.name, getattr(defaults, f.name)) for f in fields(SolverOptions)}
        options = SolverOptions(**values)
        logger.debug("Solver options: %s", options)
        return options

    def restore_feasibility_options(self) -> FeasibilityOptions:
        """Fully populated FeasibilityOptions for the current layers."""
        defaults = FeasibilityOptions()
        values = {f.name: getattr(defaults, f.name) for f in fields(FeasibilityOptions)}
        for key, name in _FEASIBILITY_KEYS.items():
            values[name] = self._value(key, values[name])
        options = FeasibilityOptions(**values)
        logger.debug("Feasibility options: %s", options)
        return options

    def restore_seed(self) -> int:
        """Random seed for sequence generation and channel sweeps (default 0)."""
        return int(self._value("seed", 0))
