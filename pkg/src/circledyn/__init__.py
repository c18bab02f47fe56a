"""Expanding circle-map semigroups: Markov partitions, induced maps,
stationary measures, and thermodynamic formalism at desk scale."""

__version__ = "0.1.0"

from .circle import Arc, circle_dist, mod1
from .errors import (
    CircleDynError,
    ConfigError,
    ConstructionFailure,
    ConvergenceFailure,
    BoundaryOrbitError,
    CoverGapError,
    InvalidWordError,
    MathFailure,
    NonInvariantMeasureError,
    NotLocallyExpandingError,
)
from .semigroup import (
    GeneratorSystem,
    affine_generator,
    apply_word,
    check_topological_mixing,
    derivative_along_word,
    is_admissible,
    lebesgue_number,
    perturbed_generator,
    sample_walk,
    verify_locally_expanding,
)
