"""Exception hierarchy shared by the solver layers and the scenario runner."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Sequence


class ElastoperiodicError(Exception):
    """Base class for every error raised by elastoperiodic."""


class ConfigurationError(ElastoperiodicError):
    """Raised when a grid, mask, quadratic form or run configuration is invalid."""


class ZeroModeError(ElastoperiodicError):
    """Raised when a symbol that is singular at the origin is requested at ξ = 0."""

    def __init__(self, operation: str) -> None:
        super().__init__(f"{operation} is undefined at the zero mode ξ = 0")
        self.operation = operation


class NearSingularError(ElastoperiodicError):
    """Raised when |1 − e^{σT}| falls below the resolvent floor."""

    def __init__(self, sigma: complex, floor: float) -> None:
        super().__init__(f"|1 - exp(sigma*T)| < {floor:g} for sigma = {sigma!r}")
        self.sigma = sigma
        self.floor = floor


class GridMismatchError(ElastoperiodicError):
    """Raised when fields on different grids (or time nodes) are combined."""


class NonFiniteError(ElastoperiodicError):
    """Raised when a Fourier multiplier is not finite at some lattice mode."""

    def __init__(self, mode: tuple[int, int, int]) -> None:
        super().__init__(f"multiplier is not finite at lattice mode k = {mode}")
        self.mode = mode


class DivergenceError(ElastoperiodicError):
    """Raised when a field overflows or a monitored norm exceeds its blow-up bound."""

    def __init__(self, message: str, *, iteration: int | None = None, time: float | None = None) -> None:
        super().__init__(message)
        self.iteration = iteration
        self.time = time


class NonConvergenceError(ElastoperiodicError):
    """Raised when the Picard iteration exhausts ``max_iter``."""

    def __init__(self, residuals: Sequence[float]) -> None:
        last = residuals[-1] if residuals else float("nan")
        super().__init__(
            f"Picard iteration did not converge in {len(residuals)} steps (last residual {last:.3e}); the forcing is likely too large"
        )
        self.residuals = list(residuals)


class DomainError(ElastoperiodicError):
    """Raised when a request falls outside the table of covered estimates."""

    def __init__(self, message: str, covered: Sequence[str] = ()) -> None:
        if covered:
            message = f"{message}; covered: {', '.join(covered)}"
        super().__init__(message)
        self.covered = list(covered)


class DegenerateDataError(ElastoperiodicError):
    """Raised when a decay fit has no usable samples (empty window or zero norms)."""


class UnknownScenarioError(ElastoperiodicError):
    """Raised when ``run_scenario`` is given a scenario id it does not know."""

    def __init__(self, scenario: str, known: Sequence[str]) -> None:
        super().__init__(f"unknown scenario {scenario!r}; expected one of: {', '.join(known)}")
        self.scenario = scenario
        self.known = list(known)
