"""Exception hierarchy shared by all modules.

``ConfigError`` maps to CLI exit status 1, every ``NumericalError`` to exit
status 2. Outcomes such as "no plateau" or "Newton did not converge" are not
errors; they are reported through result objects.
"""


class DriftDynamicsError(Exception):
    """Base class for all package errors."""


class ConfigError(DriftDynamicsError, ValueError):
    """Invalid configuration: unknown keys, kinds, scenarios or parameter ranges."""


class NumericalError(DriftDynamicsError, ArithmeticError):
    """Base class for numerical failures."""


class DomainError(NumericalError, ValueError):
    """Input outside the mathematical domain of an operation."""


class DegenerateIndicatorError(NumericalError):
    """Winner indicator with zero variance (coinciding prototypes)."""


class InconsistentStateError(NumericalError):
    """Order parameters that no pair of real vectors can realise."""


class ConstructionError(NumericalError, ValueError):
    """Requested vector configuration is infeasible."""


class BracketError(NumericalError):
    """Bisection bracket without a sign change."""


class IntegrationDivergedError(NumericalError):
    """State left the admissible set during integration.

    The trajectory up to the last valid node is attached as ``trajectory``.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SimulationDivergedError(NumericalError):
    """Monte Carlo run produced non-finite weights."""

    def __init__(self, message, run_index=None, step=None, seed=None):
        super().__init__(message)
        self.run_index = run_index
        self.step = step
        self.seed = seed
