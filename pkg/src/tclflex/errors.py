"""Exception types shared across the package."""


class TclError(Exception):
    """Base class for every error raised by tclflex."""


class ModelDivergence(TclError):
    """Temperature became non-finite during integration."""


class PowerBoundViolation(TclError, ValueError):
    """A continuous power input lies outside [0, P_m]."""


class InfeasibleCycle(TclError, ValueError):
    """Parameters do not yield a finite, positive hysteresis cycle."""


class SetpointUnreachable(TclError, ValueError):
    """Nominal power falls outside (0, P_m): the unit cannot hold its set-point."""


class SpecInfeasible(TclError, ValueError):
    """A generated fleet member violates the parameter invariants."""


class ZeroFlexibility(TclError, ValueError):
    """A unit with P_m == P_o has no upward flexibility to allocate."""


class WrongHeterogeneity(TclError, ValueError):
    """A closed-form solver was called on a fleet outside its hypothesis."""


class ContractViolation(TclError):
    """A controller issued a command the plant must not execute."""


class ConfigError(TclError, ValueError):
    """Scenario configuration is malformed or infeasible."""
