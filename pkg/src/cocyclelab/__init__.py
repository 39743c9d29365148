"""cocyclelab: a numerical laboratory for 2x2 contracting cocycles.

Construct, perturb and verify linear cocycles over periodic orbits:
flexibility witnesses at the matrix level, radial realization as
diffeomorphism cocycles with certified derivative bounds, insertion of
homothetic fundamental domains, and steering of strong-stable-manifold
meridians on the orbit-space torus.
"""

from .cocycle import (
    CocyclePath,
    FlexReport,
    LinearCocycle,
    cocycle_distance,
    path_diameter,
    return_product,
    verify_flexible,
)
from .factory import (
    ScheduleInfeasible,
    ScheduleL,
    TransitionKit,
    angle_distortion_check,
    annihilation_path,
    assemble_flex_cocycle,
    build_flex_witness,
    diagonalizing_index,
    homoper_path,
    homothety_from_complex,
    plan_schedule,
    signed_reduction,
)
from .geometry import TorusChart
from .linalg2 import eig2, mat2, opnorm, rotation
from .manifold import (
    TorusCurve,
    TorusPoint,
    WssTrace,
    crossing_count,
    curve_hausdorff,
    eval_fiber_inverse,
    meridians_from_trace,
    parallel_curve,
    project_curve,
    project_to_torus,
    trace_wss,
)
from .realization import (
    GridSpec,
    LinearCocycleMaps,
    RadialCocycle,
    Reparam,
    build_reparam,
    certify_realization,
    eval_fiber_derivative,
    eval_fiber_map,
)
from .retard import (
    RetardableSpec,
    RetardedCocycle,
    check_retard_perturbation_bound,
    check_retardable,
    homothetic_region,
    realize_witness,
    retard,
)
from .steering import (
    AnnulusDiffeo,
    SteeredCocycle,
    TorusDiffeoFactor,
    TorusDiffeoFactorization,
    TorusFlowMap,
    TorusVectorField,
    build_transport_flow,
    compose_perturbation,
    fragment,
    lift_factor,
    make_finger_targets,
    make_shift_targets,
    make_twist_targets,
    random_annulus_diffeo,
    steer_meridians,
)

__version__ = "0.1.0"
