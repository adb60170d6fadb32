"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2,
InfeasibleRegime -> 3, NumericsError -> 4.
"""


class ContractViolation(ValueError):
    """An operation was called outside its stated preconditions."""


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


class InfeasibleRegime(RuntimeError):
    """The requested experiment is not reachable at desk scale."""


class NumericsError(RuntimeError):
    """A numerical routine failed to reach its stated tolerance."""


class PlantingError(RuntimeError):
    """A condensate plan cannot be applied to this sampled graph.

    Raised when the planted weights would not dominate the ambient
    weights; callers typically resample the base graph and retry.
    """
