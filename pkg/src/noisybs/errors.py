"""Exception hierarchy shared by every module."""


class NoisyBSError(Exception):
    """Base class for library errors."""


class CapacityError(NoisyBSError, ValueError):
    """An input exceeds a configured size cap."""


class ExactArithmeticError(NoisyBSError, ValueError):
    """Exact rational arithmetic was requested on a non-rational parameter."""


class InvariantError(NoisyBSError, ArithmeticError):
    """A numerical invariant was violated beyond tolerance."""


class ImaginaryResidueError(InvariantError):
    """A quantity that must be real carries a large imaginary part."""

    def __init__(self, message, residue):
        super().__init__(f"{message} (imaginary residue {residue:.3e})")
        self.residue = residue
