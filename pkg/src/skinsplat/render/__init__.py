from .camera import Camera, Image, RenderStats, load_pfm
from .config import DEFAULT_CONFIG, RasterConfig
from .projection import ProjectedSplats, backproject_gradients, project
from .rasterizer import (
    GradientBuffers,
    bench,
    human_coverage_mask,
    render,
    render_backward,
    render_human_only,
)

__all__ = [
    "Camera",
    "Image",
    "RenderStats",
    "RasterConfig",
    "DEFAULT_CONFIG",
    "ProjectedSplats",
    "project",
    "backproject_gradients",
    "GradientBuffers",
    "render",
    "render_backward",
    "render_human_only",
    "human_coverage_mask",
    "bench",
    "load_pfm",
]
