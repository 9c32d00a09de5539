"""Boundary representations of free groups on their Cayley trees.

Patterson-Sullivan densities on the boundary of the 2k-regular tree,
Knapp-Stein kernel operators and their s -> 1 degeneration, the special
representation cocycle mu_{g.o} - mu_o with its Kuhn-Vershik energy profile,
and Roblin-style orbit equidistribution with cocycle von Neumann averages.
"""

from .geometry import (
    BoundaryPoint,
    TreeModel,
    busemann,
    compose,
    distance,
    gromov_product,
    inverse,
    ray,
    reduce_word,
    shadow,
    sphere_enumerate,
    sphere_size,
    visual_distance,
    word_from_str,
    word_to_str,
)
from .conformal import (
    critical_exponent,
    growth_base,
    orbit_measure,
    ps_mass,
    ps_mass_at,
    rn_derivative,
    shadow_lemma_check,
)
from .cylfun import CylinderFunction, pair_Q, pi_apply
from .operators import (
    GalerkinForm,
    KnappStein,
    LogGromov,
    degeneration_check,
    fast_apply,
    galerkin,
    intertwine_residual,
    negative_type_check,
    quadratic_form,
    zero_mean_spectrum,
)
from .cocycle import (
    DriftResult,
    RandomWalkSpec,
    cocycle_density,
    cocycle_energy,
    drift_mc,
    dF_value,
    F_value,
    fundamental_identity_residual,
    kuhn_vershik_profile,
    resolved_theta,
    uniform_generator_walk,
)
from .equidistribution import (
    AtomicOrbitMeasure,
    PairFunction,
    SphereCover,
    TestFunction,
    affine_average,
    annulus,
    boundedness_monitor,
    cone_count_ratio,
    mixing_decay,
    nu_measure,
    roblin_average,
    vitali_cover,
)

__version__ = "0.1.0"
