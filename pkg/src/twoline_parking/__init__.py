"""Two-line discrete car parking: ODE solution, kinetic Monte Carlo and an exact small-ring oracle."""

__version__ = "0.1.0"

from .core import ModelVariant, TransitionKind, attempt_outcome, transition_rate  # noqa: E402

__all__ = ["ModelVariant", "TransitionKind", "attempt_outcome", "transition_rate", "__version__"]
