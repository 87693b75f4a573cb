"""Exception types shared across the package."""


class WongZakaiError(Exception):
    pass


class StructuralError(WongZakaiError, ValueError):
    """Shapes, spaces or grids do not line up."""


class ArgumentError(WongZakaiError, ValueError):
    """An argument lies outside its admissible range."""


class ParameterError(WongZakaiError, ValueError):
    """Model parameters violate a structural assumption."""


class NumericalError(WongZakaiError, ArithmeticError):
    """A path blew up or an inner iteration failed to converge.

    ``time`` is the first monitoring time at which the problem was seen and
    ``path`` the row of the batch (``None`` for single paths).
    """

    def __init__(self, message, time=None, path=None, seed=None, m=None):
        super().__init__(message)
        self.time = time
        self.path = path
        self.seed = seed
        self.m = m
