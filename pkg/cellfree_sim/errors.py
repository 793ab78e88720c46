"""Exception types for Cellfree Sim."""


class SimulationError(RuntimeError):
    """Base class for numerical failures inside a simulation trial."""


class DualityError(SimulationError):
    """The DL power system has no non-negative solution for the given targets."""


class DegenerateReceiverError(SimulationError):
    """A receiver could not be formed (e.g. all-zero block stack)."""
