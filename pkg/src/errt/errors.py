"""Exception types raised by the planner and the simulation harness."""


class ErrtError(Exception):
    """Base class for every error raised by this package."""


class OutOfBoundsError(ErrtError, ValueError):
    pass


class StartBlocked(ErrtError):
    """The planning start does not lie in a known-free voxel."""


class ExplorationExhausted(ErrtError):
    """There are no unknown voxels left to explore."""


class NoCandidates(ErrtError):
    """No goal was reached by the tree, so there is nothing to select from."""


class EmptyTrajectory(ErrtError, ValueError):
    pass


class NonFinite(ErrtError, FloatingPointError):
    """The NMPC rollout produced NaN or inf."""


class GenerationFailed(ErrtError):
    pass


class MissionStalled(ErrtError):
    def __init__(self, message, metrics=None):
        super().__init__(message)
        self.metrics = metrics


class ConfigError(ErrtError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownKey(ConfigError, KeyError):
    def __str__(self):
        return str(self.args[0])


class RangeError(ConfigError):
    pass
