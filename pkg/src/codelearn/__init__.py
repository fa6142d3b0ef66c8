"""Label-efficient multiclass learning when classes are cells of a hyperplane code."""
from .clustering import (
    coarsest_pure_pruning,
    mark_active,
    nearest_cluster_classify,
    radius_components,
    single_linkage_dendrogram,
)
from .geometry import (
    CodeMatrix,
    HalfBall,
    Hyperplane,
    SphericalCap,
    ball_slice_bounds,
    ball_slice_probability,
    cap_measure,
    cap_radius,
    decode,
    hamming_distance,
    predict_codeword,
    projected_density_bounds,
    unit_ball_volume,
)
from .harness import ExperimentConfig, emit_report, estimate_error, run_experiment
from .learners import (
    agnostic_wrap,
    choose_connection_radius,
    hierarchical_learn,
    min_halfball_direction,
    plane_detection_learn,
    robust_sphere_learn,
    single_linkage_learn,
)
from .problems import (
    LabeledOracle,
    ProblemInstance,
    draw_sample,
    generate_boundary_features,
    generate_ecoc,
    generate_ecoc_manifold,
    generate_one_vs_all,
    make_heldout,
    query_label,
    verify_assumptions,
)

__version__ = "0.1.0"
