"""Exception types raised by the library."""


class DomainError(ValueError):
    """A closed-form expression was evaluated outside its real domain."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite or non-physical intermediate."""


class SingularityError(NumericError):
    """A variance formula was evaluated where its derivative vanishes."""
