"""Launch the render service on the synthetic test scene for the UI E2E run.

Prints ``SERVICE_URL=http://...`` once the server is up, then serves until
killed. Run from anywhere; resolves the repo root relative to this file.
"""

import sys
import threading
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "tests"))

import numpy as np  # noqa: E402

from skinsplat.body import Pose  # noqa: E402
from skinsplat.service import SessionState, serve  # noqa: E402

from fixtures import make_synthetic_setup  # noqa: E402


def main():
    setup = make_synthetic_setup(resolution=48, num_cameras=4, image_size=96, n_background=150)
    scene = setup.truth
    state = SessionState(
        background=scene.background,
        human=scene.human,
        mesh=scene.mesh,
        texture=scene.texture,
        alignment=scene.alignment,
        pose=Pose.identity(scene.mesh.num_joints),
        camera=setup.frames[0].camera,
    )
    server = serve(state, host="127.0.0.1", port=0)
    state.render_frame()  # warm the JIT before the client starts timing
    print(f"SERVICE_URL=http://127.0.0.1:{server.server_address[1]}", flush=True)
    thread = threading.Thread(target=server.serve_forever)
    thread.start()
    try:
        thread.join()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
