"""Exception types shared across the package."""


class SwitchGameError(Exception):
    """Base class for all package-specific failures."""


class ConfigurationError(SwitchGameError):
    """A requested run is not representable (step-size bound unattainable,
    enumeration guard exceeded, malformed config file)."""


class EstimationError(SwitchGameError):
    """A sampled estimate could not be formed (non-finite constants, or
    every Monte Carlo path was aborted)."""


class NumericalBlowupError(SwitchGameError):
    """A non-finite value appeared mid-computation."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ZenoAbortError(SwitchGameError):
    """A simulated path exceeded its switch cap; carries the time at which
    the switch accumulation was detected."""

    def __init__(self, message, abort_time, switch_count):
        super().__init__(message)
        self.abort_time = abort_time
        self.switch_count = switch_count


class NoFreeLoopError(SwitchGameError):
    """The obstacle projection failed to settle within the sweep budget,
    which can only happen when zero-cost regime loops are present."""


class UnknownBenchmarkError(SwitchGameError):
    """Benchmark name not registered; the message lists what is."""


class MissingAnalyticError(SwitchGameError):
    """The benchmark has no closed-form reference value."""
