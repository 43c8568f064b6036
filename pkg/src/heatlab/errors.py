"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat:
a configuration problem, a violated call contract, and a run that went
numerically bad are different failure modes.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class PreconditionError(ValueError):
    """A documented call precondition was violated."""


class NumericalAbort(RuntimeError):
    """A run left its validity envelope (mass leak, noise floor, ...)."""


class MassConservationError(NumericalAbort):
    """Discrete mass drifted beyond the per-step budget."""
