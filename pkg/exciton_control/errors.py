"""Exception hierarchy shared by the simulator and the experiment runner."""


class ExcitonControlError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(ExcitonControlError, ValueError):
    """Invalid or incomplete experiment configuration (CLI exit code 2)."""


class LatticeError(ExcitonControlError, ValueError):
    """Invalid geometry, disorder or partition request."""


class StateError(ExcitonControlError, ValueError):
    """An excitation state could not be built or is not normalizable."""


class BasisMismatchError(ExcitonControlError, ValueError):
    """A state and a Hamiltonian live on different occupied-site bases."""


class NumericalError(ExcitonControlError, RuntimeError):
    """Numerical failure surfaced to the caller (CLI exit code 3)."""


class IntegrationError(NumericalError):
    """The pulsed integrator could not meet its tolerance above the floor step."""
