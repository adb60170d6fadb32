"""Scale-free geometric random graphs on the torus: sampling,
condensate planting, and numerical verification of the limit theory."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractViolation,
    InfeasibleRegime,
    NumericsError,
    PlantingError,
)
from .models import (
    KernelSpec,
    ModelSpec,
    ProfileSpec,
    age_attachment,
    boolean_model,
    scale_free_percolation,
)
from .rng import RngStream
from .theory import QuadSpec

__all__ = [
    "__version__",
    "ConfigError",
    "ContractViolation",
    "InfeasibleRegime",
    "NumericsError",
    "PlantingError",
    "KernelSpec",
    "ModelSpec",
    "ProfileSpec",
    "age_attachment",
    "boolean_model",
    "scale_free_percolation",
    "RngStream",
    "QuadSpec",
]
