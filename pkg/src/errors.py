"""Exception taxonomy shared by the simulator modules and the CLI."""

from __future__ import annotations

from typing import Optional, Sequence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


class NMGLEError(RuntimeError):
    """Base class for simulator failures; ``exit_code`` drives the CLI status."""

    exit_code = EXIT_CONFIG


class InvalidConfigError(NMGLEError, ValueError):
    """A physical or numerical parameter violates its invariant."""


class ConfigError(NMGLEError):
    """Raised when a config file cannot be turned into a ``SimConfig``."""

    def __init__(self, message: str, *, key: Optional[str] = None, line: Optional[int] = None) -> None:
        self.key = key
        self.line = line
        location = []
        if key:
            location.append(f"key `{key}`")
        if line is not None:
            location.append(f"line {line}")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(prefix + message)


class DegenerateDirectionError(NMGLEError, ValueError):
    """Raised when a polarization basis is requested for a zero wave vector."""


class InvalidFrequencyError(NMGLEError, ValueError):
    """Raised for non-positive mode frequencies."""


class StateShapeError(NMGLEError, ValueError):
    """Raised when a state or amplitude record does not match the lattice."""


class GridError(NMGLEError, ValueError):
    """Raised when time grids disagree or cannot be combined."""


class EmptyInputError(NMGLEError, ValueError):
    """Raised when an ensemble reduction receives no trajectories."""


class HistorySyncError(NMGLEError):
    """Raised when a convolution accumulator is out of step with its grid."""

    exit_code = EXIT_DIVERGENCE


class TrajectoryDivergedError(NMGLEError):
    """Raised when integration produces a non-finite state."""

    exit_code = EXIT_DIVERGENCE

    def __init__(self, step: int, message: str | None = None) -> None:
        self.step = step
        super().__init__(message or f"non-finite state encountered at step {step}")


class EnsembleDivergedError(NMGLEError):
    """Raised when more than the tolerated share of trajectories diverged."""

    exit_code = EXIT_DIVERGENCE

    def __init__(self, indices: Sequence[int], total: int) -> None:
        self.indices = list(indices)
        self.total = total
        super().__init__(
            f"{len(self.indices)} of {total} trajectories diverged "
            f"(first indices: {self.indices[:10]})"
        )


__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_DIVERGENCE",
    "EXIT_IO",
    "NMGLEError",
    "InvalidConfigError",
    "ConfigError",
    "DegenerateDirectionError",
    "InvalidFrequencyError",
    "StateShapeError",
    "GridError",
    "EmptyInputError",
    "HistorySyncError",
    "TrajectoryDivergedError",
    "EnsembleDivergedError",
]
