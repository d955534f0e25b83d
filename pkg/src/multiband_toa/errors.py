"""Exception types raised by the package."""


class MultibandError(Exception):
    """Base class for all package errors."""


class AliasingError(MultibandError, ValueError):
    """A delay maps to a phase outside ``[0, 2*pi)`` on the subcarrier grid."""

    def __init__(self, delay, phase):
        self.delay = delay
        self.phase = phase
        super().__init__(
            f"delay {delay * 1e9:.6g} ns gives phase {phase:.6g} rad, "
            "outside [0, 2*pi) for this subcarrier spacing"
        )


class RankDeficientError(MultibandError, ValueError):
    """A steering matrix lost full column rank."""


class SubspaceError(MultibandError):
    """Eigendecomposition failed or the spectrum is too degenerate to use."""


class ConfigError(MultibandError, ValueError):
    """Invalid scenario configuration. ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class TrialError(MultibandError):
    """Wraps a failure inside a Monte-Carlo trial with its coordinates."""

    def __init__(self, sweep_index, trial_index, cause):
        self.sweep_index = sweep_index
        self.trial_index = trial_index
        super().__init__(f"sweep point {sweep_index}, trial {trial_index}: {cause!r}")
