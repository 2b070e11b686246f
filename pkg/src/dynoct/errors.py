"""Exception types shared across the package.

All of them subclass ``ValueError`` so callers that only care about
"bad input" can catch one thing.
"""


class OutOfSupportError(ValueError):
    """A collagen query fell outside the padded z-support of the field."""


class DegenerateInputError(ValueError):
    """Input has no usable energy (e.g. a zero metabolic signal)."""


class DegenerateFitError(ValueError):
    """The total-variation sequence has no change point to locate."""


class ManifestError(OSError):
    """A run directory does not match its manifest."""
