"""Unified command-line interface.

Subcommands: bake, align, render, fit, bench, serve, play. File formats are
documented in docs/formats.md; the HTTP API in docs/http_api.md. The
SKINSPLAT_THREADS environment variable caps render parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="skinsplat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bake", help="bake a skinned mesh into a position texture")
    p.add_argument("--mesh", required=True, help="mesh+skeleton JSON")
    p.add_argument("--resolution", type=int, required=True)
    p.add_argument("--out", required=True, help="output .ptex file")
    p.add_argument("--png", help="optional PNG visualization of the position channel")
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("align", help="align the body to a scene point cloud")
    p.add_argument("--cloud", required=True, help="scene PLY (positions + optional RGB)")
    p.add_argument("--joints3d", required=True, help="JSON list of 3D joints")
    p.add_argument("--joints2d", required=True, help="JSON list of 2D pixels")
    p.add_argument("--intrinsics", required=True, help="JSON {fx, fy, cx, cy}")
    p.add_argument("--out", required=True, help="output alignment JSON")
    p.add_argument("--ransac-iterations", type=int, default=256)
    p.add_argument("--inlier-threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("render", help="render one frame of a fitted scene")
    p.add_argument("--scene", required=True, help="background PLY")
    p.add_argument("--human", required=True, help="human attribute binary")
    p.add_argument("--texture", required=True, help="position texture (.ptex)")
    p.add_argument("--mesh", required=True, help="mesh+skeleton JSON")
    p.add_argument("--camera", required=True, help="camera JSON")
    p.add_argument("--pose", required=True, help="pose JSON")
    p.add_argument("--alignment", help="alignment JSON (identity if omitted)")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--pfm", help="optional float PFM output")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fit", help="fit scene attributes to target frames")
    p.add_argument("--scene", required=True, help="initial background PLY")
    p.add_argument("--texture", required=True, help="position texture (.ptex)")
    p.add_argument("--mesh", required=True, help="mesh+skeleton JSON")
    p.add_argument("--frames", required=True, help="frames directory")
    p.add_argument("--config", help="fit config JSON (defaults if omitted)")
    p.add_argument("--alignment", help="alignment JSON (identity if omitted)")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="benchmark the rasterizer, print JSON FPS stats")
    p.add_argument("--points", type=int, default=50_000)
    p.add_argument("--size", default="256x256", help="WxH")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="start the interactive pose-editing service")
    p.add_argument("--scene", required=True, help="background PLY")
    p.add_argument("--human", required=True)
    p.add_argument("--texture", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--alignment")
    p.add_argument("--camera")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8090)
    p.add_argument("--ui-dir", help="static UI bundle served at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("play", help="render a motion clip to PNG frames")
    p.add_argument("--scene", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--texture", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--clip", required=True, help="motion clip JSON")
    p.add_argument("--alignment")
    p.add_argument("--camera")
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--out", required=True, help="output frame directory")
    p.set_defaults(func=cmd_play)

    args = parser.parse_args(argv)
    return args.func(args)


def cmd_bake(args) -> int:
    from .body import load_mesh_json
    from .texture import bake, save_texture, save_texture_png

    mesh = load_mesh_json(args.mesh)
    texture = bake(mesh, args.resolution)
    save_texture(texture, args.out)
    if args.png:
        save_texture_png(texture, args.png)
    print(
        json.dumps(
            {"resolution": texture.width, "valid_texels": texture.num_valid, "out": args.out}
        )
    )
    return 0


def cmd_align(args) -> int:
    from .alignment import (
        CameraIntrinsics,
        RansacConfig,
        SceneAlignment,
        fit_ground_plane,
        solve_pnp,
        solve_scale,
    )
    from .ply import read_point_cloud

    cloud, _ = read_point_cloud(args.cloud)
    joints3d = np.asarray(json.loads(Path(args.joints3d).read_text()), dtype=np.float64)
    pixels2d = np.asarray(json.loads(Path(args.joints2d).read_text()), dtype=np.float64)
    intrinsics = CameraIntrinsics.from_dict(json.loads(Path(args.intrinsics).read_text()))

    pnp = solve_pnp(joints3d, pixels2d, intrinsics)
    plane = fit_ground_plane(
        cloud,
        RansacConfig(
            iterations=args.ransac_iterations,
            inlier_threshold=args.inlier_threshold,
            seed=args.seed,
        ),
    )
    # Contract (docs/formats.md): the cloud is expressed in the alignment
    # view's camera frame, so the camera center is the origin. Scaling a
    # joint along its camera ray is then J -> s (R p + t), i.e. the final
    # alignment is x -> s R x + (s t).
    joints_cam = joints3d @ pnp.rotation.T + pnp.translation
    scale = solve_scale(np.zeros(3), joints_cam, plane)

    alignment = SceneAlignment(
        rotation=pnp.rotation, translation=scale * pnp.translation, scale=scale
    )
    alignment.save(args.out)
    print(
        json.dumps(
            {
                "rms_pixels": pnp.rms_pixels,
                "scale": scale,
                "plane": [*plane.normal.tolist(), plane.offset],
                "out": args.out,
            }
        )
    )
    return 0


def _load_scene_bundle(args):
    from .alignment import SceneAlignment
    from .body import load_mesh_json
    from .scene import load_background_ply, load_human
    from .texture import load_texture

    mesh = load_mesh_json(args.mesh)
    texture = load_texture(args.texture)
    human = load_human(args.human, texture)
    background = load_background_ply(args.scene)
    alignment = (
        SceneAlignment.load(args.alignment) if args.alignment else SceneAlignment.identity()
    )
    return mesh, texture, human, background, alignment


def cmd_render(args) -> int:
    from .body import Pose
    from .render import Camera
    from .render.rasterizer import render
    from .scene import merge, pose_human

    mesh, texture, human, background, alignment = _load_scene_bundle(args)
    camera = Camera.load(args.camera)
    pose_doc = json.loads(Path(args.pose).read_text())
    pose = Pose(
        np.asarray(pose_doc["joint_rotations"], dtype=np.float64),
        np.asarray(pose_doc.get("root_translation", [0.0, 0.0, 0.0]), dtype=np.float64),
    )
    posed = pose_human(human, mesh, pose, alignment, texture)
    image = render(merge(background, posed), camera)
    image.save_png(args.out)
    if args.pfm:
        image.save_pfm(args.pfm)
    stats = image.stats
    print(
        json.dumps(
            {
                "out": args.out,
                "drawn": stats.num_drawn if stats else None,
                "culled": stats.num_culled if stats else None,
            }
        )
    )
    return 0


def cmd_fit(args) -> int:
    from .alignment import SceneAlignment
    from .body import load_mesh_json
    from .fit import FitConfig, FitScene, optimize
    from .fit_io import load_frames_dir
    from .scene import HumanGaussians, load_background_ply
    from .texture import load_texture

    mesh = load_mesh_json(args.mesh)
    texture = load_texture(args.texture)
    human = HumanGaussians.from_texture(texture)
    background = load_background_ply(args.scene)
    alignment = (
        SceneAlignment.load(args.alignment) if args.alignment else SceneAlignment.identity()
    )
    config = (
        FitConfig.from_dict(json.loads(Path(args.config).read_text()))
        if args.config
        else FitConfig()
    )
    frames = load_frames_dir(args.frames, mesh)
    scene = FitScene(
        background=background, human=human, mesh=mesh, alignment=alignment, texture=texture
    )
    result = optimize(scene, frames, config, run_dir=args.out)
    initial = result.history[0].total if result.history else 0.0
    final = result.history[-1].total if result.history else 0.0
    print(json.dumps({"iterations": len(result.history), "initial": initial, "final": final}))
    return 0


def cmd_bench(args) -> int:
    from .render.rasterizer import bench

    width, height = (int(x) for x in args.size.lower().split("x"))
    stats = bench(
        num_points=args.points, width=width, height=height, frames=args.frames, seed=args.seed
    )
    print(json.dumps(stats, indent=2))
    return 0


def cmd_serve(args) -> int:
    from .service import load_session, serve

    state = load_session(
        background_ply=args.scene,
        human_bin=args.human,
        texture_file=args.texture,
        mesh_json=args.mesh,
        alignment_json=args.alignment,
        camera_json=args.camera,
    )
    server = serve(state, host=args.host, port=args.port, ui_dir=args.ui_dir)
    print(f"serving on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_play(args) -> int:
    from .render import Camera
    from .service import MotionClip, load_session, play_clip

    state = load_session(
        background_ply=args.scene,
        human_bin=args.human,
        texture_file=args.texture,
        mesh_json=args.mesh,
        alignment_json=args.alignment,
        camera_json=args.camera,
    )
    clip_doc = json.loads(Path(args.clip).read_text())
    clip = MotionClip.from_dict(clip_doc, state.mesh.num_joints)
    paths = play_clip(state, clip, args.out, fps=args.fps)
    print(json.dumps({"frames": len(paths), "out": args.out}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
