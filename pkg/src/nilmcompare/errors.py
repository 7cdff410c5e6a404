"""Exception types shared across the toolkit."""


class DataError(ValueError):
    """Raised when input data violates a precondition of an operation.

    The command line maps this to exit status 2.
    """
