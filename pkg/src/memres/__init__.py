"""Electronic reservoir computing: LRC banks, memristor networks, hybrids and ESN baselines."""

__version__ = "0.1.0"

from .errors import ConfigurationError, NumericalError, UndefinedCapacityError  # noqa: E402
from .signals import SignalConfig, TimeGrid, Trajectory, generate_input  # noqa: E402

__all__ = ["ConfigurationError", "NumericalError", "UndefinedCapacityError",
           "SignalConfig", "TimeGrid", "Trajectory", "generate_input", "__version__"]
