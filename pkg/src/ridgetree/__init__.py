"""ridgetree: tree skeletons from 3D density volumes.

Extracts center-line graphs along density ridges with persistence-guided
discrete Morse theory, converts them into rooted trees by weighted
shortest-path spanning forests, simplifies the trees with score-based
strategies, and summarizes the surrounding signal as conserved per-node
weights. Includes evaluation metrics against ground-truth skeletons and
regional coverage analysis.
"""

from .forest import RootSet, SkeletonForest, build_forest, edge_weight, snap_roots
from .graphsimp import (
    FlowField,
    estimate_flow_vectors,
    path_score,
    prune_paths,
    remove_boundary_arcs,
    vector_score_along_path,
)
from .grid import DensityField, GridGeometry, downsample_sum, gaussian_filter
from .metrics import MatchReport, discretize, f1_vs_bound_sweep, match_metrics
from .morse import (
    GradientForest,
    MorseGraph,
    build_gradient_forest,
    critical_edge_ranks,
    extract_morse_graph,
    unstable_manifold,
)
from .persistence import (
    Cell,
    Filtration,
    PersistencePairing,
    build_filtration,
    compute_persistence,
    one_dim_pairs,
    persistence_of,
    zero_dim_pairs,
)
from .pipeline import PipelineConfig, PipelineError, SkeletonizeResult, run_skeletonize
from .regions import RegionLabelVolume, RegionReport, region_report
from .swcio import read_swc, write_swc, write_weights
from .synth import (
    sample_skeleton_points,
    straight_tube_tree,
    synth_tree_volume,
    tube_fixture,
    y_fixture,
    y_junction_tree,
)
from .tree import (
    SkeletonTree,
    assign_thickness,
    assign_weights,
    combine_scores,
    density_scores,
    leaf_burner,
    relative_threshold,
    root_grower,
    smooth_scores,
    top_k_branches,
)
from .vtkio import VtkParseError, read_vtk, write_vtk

__version__ = "0.1.0"
