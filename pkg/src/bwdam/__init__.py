"""Dense associative memory over Gaussian measures in the Bures-Wasserstein
geometry: storage banks on Wasserstein spheres, softmax-weighted transport
retrieval, guarantee checking and figure-reproduction experiment runners.
"""

__version__ = "0.1.0"

from .geometry import (
    AffineMap,
    CommutingFamily,
    GaussianMeasure,
    bures_w2,
    bures_w2_squared,
    dirac_w2_squared,
    geodesic,
    neg_log_l2_inner,
    ot_map,
    push_forward_affine,
)
from .memory import (
    MemoryBank,
    RetrievalTrace,
    WeightVector,
    dam_step,
    displacement_norm,
    energy,
    gradient_field,
    retrieve,
    weights,
)
from .sampling import (
    PerturbSpec,
    SphereConfig,
    perturb_to_distance,
    sample_commuting_bank,
    sample_noncommuting_bank,
)
from .theory import (
    AssumptionReport,
    CapacityInputs,
    capacity_bound,
    check_assumptions,
    iterations_for_eps,
    one_step_error_bound,
    separation_delta,
)

__all__ = [
    "__version__",
    "AffineMap",
    "AssumptionReport",
    "CapacityInputs",
    "CommutingFamily",
    "GaussianMeasure",
    "MemoryBank",
    "PerturbSpec",
    "RetrievalTrace",
    "SphereConfig",
    "WeightVector",
    "bures_w2",
    "bures_w2_squared",
    "capacity_bound",
    "check_assumptions",
    "dam_step",
    "dirac_w2_squared",
    "displacement_norm",
    "energy",
    "geodesic",
    "gradient_field",
    "iterations_for_eps",
    "neg_log_l2_inner",
    "one_step_error_bound",
    "ot_map",
    "perturb_to_distance",
    "push_forward_affine",
    "retrieve",
    "sample_commuting_bank",
    "sample_noncommuting_bank",
    "separation_delta",
    "weights",
]
