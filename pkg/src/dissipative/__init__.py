"""Spectral singularities, scattering and absorption for radial optical models.

The model is ``H = -Delta + V - i g^2 W`` on R^3 with compactly supported
radial ``V`` and ``W >= 0``, reduced to partial waves on a uniform radial grid.
"""

from .errors import (
    BoxTooSmall,
    ClassificationUndetermined,
    InvalidArgument,
    MatchingDegenerate,
    NotFound,
    OrderUndetermined,
    SpectralSingularityError,
    Unsupported,
)
from .model import (
    Channel,
    OpticalModel,
    PotentialSpec,
    RadialGrid,
    ValidationReport,
    build_radial_grid,
    sample_potential,
    validate_hypotheses,
)
from .freegreen import free_green_kernel, riccati, spherical_bessel
from .resolvent import (
    Region,
    assemble_A,
    assemble_B,
    birman_schwinger_distance,
    discrete_spectrum,
    refine_eigenvalue,
)
from .scattering import scattering_coefficient, scattering_profile
from .singularities import (
    asymptotic_completeness_verdict,
    construct_singularity,
    genericity_sweep,
    regularity_margin,
    scan_singularities,
    singularity_order,
)
from .dynamics import decay_check, propagate, weak_ac_probe

__version__ = "0.1.0"
