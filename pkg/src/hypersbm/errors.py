"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: malformed files, out-of-range ids, bad parameters."""


class NumericalAbort(RuntimeError):
    """A numerical routine hit a non-recoverable state (NaN/Inf, blow-up)."""
