"""Exception types shared across the package.

Validation problems (bad parameters, mismatched grids, malformed config)
derive from ValueError; runtime failures of the iteration (divergence,
invariant violations, non-finite numbers) derive from RuntimeError.  The
command line maps the two families to distinct exit codes.
"""


class GridMismatchError(ValueError):
    """Two fields that must live on the same grid do not."""


class ConfigError(ValueError):
    """A run configuration violates one of the standing assumptions."""


class PgmError(ValueError):
    """A PGM stream is malformed.  Carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = "%s (byte offset %d)" % (message, offset)
        super().__init__(message)
        self.offset = offset


class ConvergenceError(RuntimeError):
    """An iterative solve stopped without meeting its residual target."""

    def __init__(self, message, res_alpha=None, res_u=None):
        super().__init__(message)
        self.res_alpha = res_alpha
        self.res_u = res_u


class NumericError(RuntimeError):
    """A NaN or infinity appeared in a field during iteration."""


class MaxPrincipleError(RuntimeError):
    """An intensity iterate left [0, 1] by more than the hard tolerance."""


class EnergyDescentError(RuntimeError):
    """A step increased the energy beyond the certified slack tolerance."""
