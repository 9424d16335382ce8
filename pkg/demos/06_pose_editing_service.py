"""Interactive pose editing over HTTP.

Starts the render service on a fitted-style scene, drives it with a few
scripted joint edits (the same calls the browser UI makes), saves the
returned frames, and reports the per-frame render latency header.

Pass --serve to keep the server running for the browser UI afterwards.
"""

import json
import sys
import threading
import urllib.request

from skinsplat import Pose
from skinsplat.alignment import SceneAlignment
from skinsplat.service import SessionState, serve

from _common import make_room_background, make_textured_human, orbit_camera, out_dir


def http(method, url, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    if data:
        req.add_header("Content-Type", "application/json")
    with urllib.request.urlopen(req) as resp:
        return dict(resp.headers), resp.read()


def main():
    out = out_dir("06_service")
    mesh, texture, human = make_textured_human(resolution=64)
    state = SessionState(
        background=make_room_background(),
        human=human,
        mesh=mesh,
        texture=texture,
        alignment=SceneAlignment.identity(),
        pose=Pose.identity(mesh.num_joints),
        camera=orbit_camera(0.5, size=192),
    )
    server = serve(state, host="127.0.0.1", port=0)
    base = f"http://127.0.0.1:{server.server_address[1]}"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    print(f"service listening on {base}")

    _, meta = http("GET", base + "/meta")
    meta = json.loads(meta)
    print(f"meta: {len(meta['joints'])} joints, {meta['texel_count']} texels")

    edits = [
        ("rest", {}),
        ("wave", {"shoulder_l": [0.0, 0.0, 1.2], "elbow_l": [0.0, 0.0, 0.9]}),
        ("kick", {"hip_r": [0.8, 0.0, 0.0], "knee_r": [-0.6, 0.0, 0.0]}),
    ]
    for name, joints in edits:
        http("PUT", base + "/pose", {"joints": joints})
        headers, png = http("GET", base + "/frame")
        (out / f"{name}.png").write_bytes(png)
        print(f"{name:>5}: frame rendered in {headers['X-Render-Millis']} ms "
              f"-> {out / (name + '.png')}")

    if "--serve" in sys.argv:
        print("serving until Ctrl-C (open the frontend with "
              f"?service={base} or mount it at /ui)")
        try:
            thread.join()
        except KeyboardInterrupt:
            pass
    server.shutdown()
    server.server_close()


if __name__ == "__main__":
    main()
