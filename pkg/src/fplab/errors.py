"""Exception types shared across the package."""


class NumericalInputError(ValueError):
    """Input array contains NaN/Inf or is otherwise numerically unusable."""


class InvalidInitialDataError(ValueError):
    """Initial datum violates a precondition (e.g. negative values)."""


class SupercriticalAmplitudeError(ValueError):
    """Requested steady-state amplitude exceeds the admissible maximum."""


class NoCriticalAmplitudeError(ValueError):
    """Critical amplitude is undefined (linear drift, beta = 0)."""


class OutOfRegimeError(ValueError):
    """Operation invoked outside its admissible parameter regime."""


class ConfigError(ValueError):
    """Malformed or unknown entry in a run-configuration file."""


class NegativityAbort(RuntimeError):
    """A time step produced values below the negativity tolerance.

    Carries the time at which the offending state would have occurred.
    """

    def __init__(self, time: float, min_value: float):
        self.time = time
        self.min_value = min_value
        super().__init__(
            f"negative density {min_value:.3e} at t={time:.6e} "
            "(time step too large or data too rough)"
        )
