"""Exception hierarchy shared by every solver stage."""


class LQNashError(Exception):
    """Base class for all errors raised by lqnash."""


class DimensionError(LQNashError, ValueError):
    pass


class StabilityError(LQNashError):
    """A closed-loop matrix that must be Schur is not."""


class SingularityError(LQNashError):
    def __init__(self, message, cond=None):
        super().__init__(message if cond is None else f"{message} (cond={cond:.3e})")
        self.cond = cond


class InfeasibleError(LQNashError):
    """No stabilizing feedback exists for the requested pair."""


class DegenerateInputError(LQNashError):
    pass


class NonConvergenceError(LQNashError):
    """Iteration cap reached; ``trace`` holds whatever was recorded."""

    def __init__(self, message, trace=None, round_index=None):
        super().__init__(message)
        self.trace = trace
        self.round_index = round_index


class InvariantViolation(LQNashError):
    """An iterate broke a property the theory guarantees. Treat as a bug."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InitializationError(LQNashError):
    """Base for the named initialization checks of the leader loop."""

    check = "initialization"


class NotStabilizableInit(InitializationError):
    check = "stabilizability"


class InnerOracleInit(InitializationError):
    check = "inner_oracle"


class CurvatureInit(InitializationError):
    check = "curvature"


class ConfigError(LQNashError, ValueError):
    pass
