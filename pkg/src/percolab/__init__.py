"""percolab: a laboratory for supercritical bond percolation on Z^d.

Core objects: seeded bond configurations on finite boxes, chemical-distance
balls, space-time cut-point events with configuration surgery, macroscopic
good/bad block analysis, exact combinatorial constructions, and Monte Carlo
estimators for the distance constant and event decay rates.
"""

from .cutpoints import (
    CutPointRecord,
    EventOutcome,
    EventResult,
    EventSpec,
    SurgeryPlan,
    alpha_default,
    apply_surgery,
    detect_cutpoints,
    event_A,
    event_A_free,
    evaluate_event_grid,
    force_cutpoint,
    line_count,
    upper_tail_event,
)
from .combinatorics import (
    ExteriorBoundary,
    ParallelGeometry,
    PathBundle,
    PerpendicularGeometry,
    PointSet,
    SeparatedMatching,
    axis_avoiding_paths,
    count_lattice_animals,
    disjoint_path_bundle,
    distinct_coordinate_subset,
    exterior_boundary,
    isoperimetry_holds,
    projection_best,
    segment_distance,
    separated_matching,
    staircase_path,
)
from .errors import PercolabError
from .estimators import (
    EventFamily,
    JEstimate,
    MuEstimate,
    RateEstimate,
    RateSurface,
    Tally,
    check_rate_properties,
    estimate_J,
    estimate_event_rate,
    estimate_mu,
    estimate_rate_surface,
    subadditivity_defects,
    upper_tail_vs_cutpoint_experiment,
    wilson_interval,
)
from .harness import cli_dispatch, main
from .lattice import (
    BoxSpec,
    ClusterLabeling,
    PercolationSample,
    infinite_cluster_proxy,
    label_clusters,
    sample_configuration,
)
from .metric import (
    BallGrowth,
    chemical_distance,
    constrained_distance,
    geodesic,
    grow_ball,
    resolved_distance,
    volume_threshold_time,
)
from .renorm import (
    BadClusterReport,
    MacroClassification,
    MacroLattice,
    ScaledL1Norm,
    bad_clusters,
    classify_boxes,
    dependency_range,
    route_through_good,
    slab_experiment,
)

__version__ = "0.1.0"
