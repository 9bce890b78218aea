"""Safe landing zone detection for quadrotors.

Fuses semantic label images with depth-derived 3D geometry into a growing 2D
log-odds occupancy grid of landable/non-landable cells, then picks the
lowest-cost landing patch. Ships with a synthetic scene harness, a CLI and an
HTTP mapping service.
"""

__version__ = "0.1.0"

from .cloud import (
    PipelineParams,
    PlaneModel,
    classify_cloud,
    condition_cloud,
    mls_smooth,
    plane_slope,
    point_plane_distance,
    ransac_plane,
    statistical_outlier_removal,
    voxel_downsample,
)
from .config import RunConfig, load_config, save_config
from .geometry import (
    CameraIntrinsics,
    DepthImage,
    PointCloud,
    RigidTransform,
    depth_to_cloud,
    disparity_to_depth,
    project_point,
    project_points,
    transform_cloud,
)
from .grid import CellClass, ClassGrid, GridMap, GridParams, export_map, update_grid
from .selector import (
    DroneState,
    LandingPatch,
    SelectorConfig,
    Waypoint,
    clearance_transform,
    find_patches,
    landing_waypoints,
    patch_cost,
    select_landing_site,
)
from .semantics import (
    ClassTable,
    DEFAULT_CLASS_TABLE,
    LabelImage,
    corrupt_labels,
    filter_cloud_by_semantics,
    is_safe_class,
)
from .sim import (
    Box,
    EvalReport,
    Ramp,
    Scene,
    SceneSpec,
    TrajectorySpec,
    build_scene,
    evaluate_class_grid,
    evaluate_map,
    generate_trajectory,
    render_frame,
    simulate_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
