"""
Exceptions raised by the angle coder laboratory
"""


class AngleCoderError(Exception):
    """Base class for every error raised by this package"""


class InvalidInputError(AngleCoderError, ValueError):
    """Input outside the domain of an operation (non-finite, wrong shape, bad range)"""


class DegenerateModulusError(AngleCoderError, ArithmeticError):
    """Cartesian modulus too small for arctan2 to carry a phase"""

    def __init__(self, modulus: float, floor: float, frequency: int = 1):
        self.modulus = modulus
        self.floor = floor
        self.frequency = frequency
        super().__init__(
            f"modulus {modulus:.3e} of frequency {frequency} is below the floor {floor:.1e}"
        )
