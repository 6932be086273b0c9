"""
Exception hierarchy for the Lindstedt series engine
"""
from typing import List, Optional, Sequence, Tuple


class LindstedtError(Exception):
    """Base class for every engine error"""


class ModelValidationError(LindstedtError):
    """The model document or the model itself breaks a hypothesis"""


class ParseError(ModelValidationError):
    """The model document could not be parsed"""


class NotCritical(ModelValidationError):
    """beta0 is not a critical point of the averaged perturbation"""

    def __init__(self, gradient_norm: float, tol: float):
        super().__init__(f"gradient norm {gradient_norm:.3e} exceeds tolerance {tol:.3e}")
        self.gradient_norm = gradient_norm
        self.tol = tol


class Degenerate(ModelValidationError):
    """The hessian at beta0 has an eigenvalue too close to zero"""


class Indefinite(ModelValidationError):
    """The hessian at beta0 has eigenvalues of both signs"""


class ZeroAlphaAverageViolated(LindstedtError):
    """The zero mode of the alpha force did not vanish"""

    def __init__(self, order: int, magnitude: float, tol: float):
        super().__init__(
            f"alpha average at order {order} is {magnitude:.3e} (tolerance {tol:.3e})"
        )
        self.order = order
        self.magnitude = magnitude


class SingularHessian(LindstedtError):
    """The averaged hessian cannot be inverted"""


class ZeroDivisorLine(LindstedtError):
    """A line that needs a propagator carries zero momentum"""


class SeparationUnachievable(LindstedtError):
    """No grid candidate keeps the required distance from the divisors"""

    def __init__(self, scale: int, blocking: Sequence[Tuple[int, ...]]):
        shown = ", ".join(str(nu) for nu in list(blocking)[:5])
        super().__init__(f"no admissible gamma at scale {scale}; blocking modes: {shown}")
        self.scale = scale
        self.blocking: List[Tuple[int, ...]] = list(blocking)


class ScaleOutOfRange(LindstedtError):
    """A divisor is smaller than the last constructed gamma"""

    def __init__(self, value: float, floor: float):
        super().__init__(f"divisor {value:.6e} below gamma floor {floor:.6e}; lower n_min")
        self.value = value
        self.floor = floor


class SingularPropagator(LindstedtError):
    """An internal self-energy line hit a vanishing divisor"""


class NearSingularInversion(LindstedtError):
    """x^2 - M is too badly conditioned to invert"""

    def __init__(self, x: complex, eps: complex, condition: float):
        super().__init__(f"condition number {condition:.3e} at x={x!r}, eps={eps!r}")
        self.x = x
        self.eps = eps
        self.condition = condition


class NoConvergence(LindstedtError):
    """The self-energy iteration did not contract"""

    def __init__(self, x: complex, eps: complex, history: Optional[List[float]] = None):
        super().__init__(f"no contraction at x={x!r}, eps={eps!r}")
        self.x = x
        self.eps = eps
        self.history = list(history or [])
