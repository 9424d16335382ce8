"""skinsplat: skinned human Gaussian avatars decoupled from background
Gaussian point clouds.

The pipeline: bake a position texture from a skinned mesh, grow dense human
Gaussians from it, align the body to a scene (PnP + ground-plane scale),
render both point sets with depth-sorted splatting, fit attributes to
target frames, and serve interactive pose editing.
"""

from .alignment import (
    CameraIntrinsics,
    GroundPlane,
    PnPResult,
    RansacConfig,
    SceneAlignment,
    apply_alignment,
    fit_ground_plane,
    project_points,
    solve_pnp,
    solve_scale,
)
from .body import (
    DaPoseConfig,
    JointTransforms,
    Pose,
    SkinnedMesh,
    canonical_to_world,
    da_pose_transforms,
    forward_kinematics,
    lbs,
    load_mesh_json,
    load_obj_with_weights,
    pose_from_canonical,
)
from .errors import (
    EmptyTextureError,
    FitDivergedError,
    PlaneFitError,
    PnPSolveError,
    ScaleSolveError,
    SkinsplatError,
)
from .fit import (
    Adam,
    FitConfig,
    FitResult,
    FitScene,
    Frame,
    LossBreakdown,
    compute_loss,
    compute_loss_with_grads,
    optimize,
    project_rows_to_simplex,
)
from .metrics import psnr, ssim, ssim_with_grad
from .render import (
    Camera,
    GradientBuffers,
    Image,
    RasterConfig,
    RenderStats,
    bench,
    human_coverage_mask,
    project,
    render,
    render_backward,
    render_human_only,
)
from .scene import (
    BackgroundGaussians,
    HumanGaussians,
    PosedHuman,
    RenderableScene,
    build_covariance,
    build_covariances,
    load_background_ply,
    load_human,
    merge,
    pose_human,
    save_background_ply,
    save_combined_ply,
    save_human,
)
from .texture import (
    PositionTexture,
    bake,
    extract_points,
    load_texture,
    save_texture,
    save_texture_png,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # body
    "SkinnedMesh", "Pose", "JointTransforms", "DaPoseConfig",
    "forward_kinematics", "lbs", "da_pose_transforms", "pose_from_canonical",
    "canonical_to_world", "load_mesh_json", "load_obj_with_weights",
    # texture
    "PositionTexture", "bake", "extract_points", "save_texture",
    "load_texture", "save_texture_png",
    # alignment
    "GroundPlane", "SceneAlignment", "RansacConfig", "CameraIntrinsics",
    "PnPResult", "fit_ground_plane", "solve_scale", "solve_pnp",
    "apply_alignment", "project_points",
    # scene
    "BackgroundGaussians", "HumanGaussians", "PosedHuman", "RenderableScene",
    "pose_human", "build_covariance", "build_covariances", "merge",
    "save_background_ply", "load_background_ply", "save_combined_ply",
    "save_human", "load_human",
    # render
    "Camera", "Image", "RasterConfig", "RenderStats", "GradientBuffers",
    "project", "render", "render_backward", "render_human_only",
    "human_coverage_mask", "bench",
    # metrics / fit
    "ssim", "ssim_with_grad", "psnr",
    "FitConfig", "Frame", "LossBreakdown", "FitScene", "FitResult", "Adam",
    "compute_loss", "compute_loss_with_grads", "optimize",
    "project_rows_to_simplex",
    # errors
    "SkinsplatError", "EmptyTextureError", "PlaneFitError", "ScaleSolveError",
    "PnPSolveError", "FitDivergedError",
]
