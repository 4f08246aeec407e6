# hierstein/errors.py
from __future__ import annotations


class HierSteinError(Exception):
    """Base class; `exit_code` is what the CLI returns when one escapes."""

    exit_code = 1


# ---- config / validation (exit 2) ----
class ConfigError(HierSteinError, ValueError):
    exit_code = 2


class ModelValidationError(ConfigError):
    pass


# ---- law construction ----
class EmptyLawError(HierSteinError, ValueError):
    exit_code = 2


class NegativeWeightError(HierSteinError, ValueError):
    exit_code = 2


class NonFiniteValueError(HierSteinError, ValueError):
    exit_code = 2


class InvalidLawError(HierSteinError, ValueError):
    """Ordering, mass or support violations in a law's own arrays."""

    exit_code = 2


class UnsupportedMomentError(HierSteinError, ValueError):
    pass


class UnsupportedLawError(HierSteinError, TypeError):
    pass


# ---- degenerate models (exit 4) ----
class DegenerateLawError(HierSteinError, ValueError):
    exit_code = 4


class NonZeroMeanError(HierSteinError, ValueError):
    exit_code = 4


# ---- size cap (exit 3) ----
class CapExceededError(HierSteinError, RuntimeError):
    exit_code = 3

    def __init__(self, projected: int, cap: int, what: str = "atoms"):
        self.projected = projected
        self.cap = cap
        super().__init__(
            f"projected {what} {projected} exceeds cap {cap}; use the sampling path"
        )


class UnsupportedPerturbationError(HierSteinError, ValueError):
    exit_code = 2


class DimensionMismatchError(HierSteinError, ValueError):
    pass


class MarginalMismatchError(HierSteinError, ValueError):
    pass


class InfeasibleEnvelopeError(HierSteinError, ValueError):
    def __init__(self, label: str, delta_state: float, delta_perturbation: float):
        self.label = label
        self.delta_state = delta_state
        self.delta_perturbation = delta_perturbation
        super().__init__(
            f"{label}: fitted δ_state={delta_state:.6g} is not below "
            f"δ_perturbation={delta_perturbation:.6g} at this horizon"
        )


class InsufficientDataError(HierSteinError, ValueError):
    pass
