import { describe, expect, it } from "vitest";

import type { FetchLike, Vec3 } from "../src/api";
import { applyOrbitDelta, orbitCamera, orbitEye } from "../src/orbit";
import { SLIDER_LIMIT, UiSession } from "../src/session";

const JOINTS = ["pelvis", "spine", "hip_l"];

interface Deferred {
  url: string;
  method: string;
  body: unknown;
  resolve: (response: Response) => void;
}

/** Mock service: records requests; can defer responses for in-flight tests. */
class MockService {
  requests: { url: string; method: string; body: unknown }[] = [];
  deferred: Deferred[] = [];
  deferFrames = false;
  deferPoses = false;
  unreachable = false;
  frameCounter = 0;
  pose: Record<string, Vec3> = Object.fromEntries(
    JOINTS.map((j) => [j, [0, 0, 0] as Vec3]),
  );

  fetch: FetchLike = (url, init) => {
    if (this.unreachable) return Promise.reject(new TypeError("connection refused"));
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.requests.push({ url, method, body });
    const path = new URL(url, "http://base").pathname;
    const make = (): Response => this.respond(path, method, body);
    if ((path === "/frame" && this.deferFrames) || (path === "/pose" && method === "PUT" && this.deferPoses)) {
      return new Promise<Response>((resolve) => {
        this.deferred.push({ url, method, body, resolve: (r) => resolve(r) });
      });
    }
    return Promise.resolve(make());
  };

  flushOne(): void {
    const next = this.deferred.shift();
    if (!next) throw new Error("nothing deferred");
    const path = new URL(next.url, "http://base").pathname;
    next.resolve(this.respond(path, next.method, next.body));
  }

  private respond(path: string, method: string, body: unknown): Response {
    if (path === "/meta") {
      return json({
        api_version: 1,
        joints: JOINTS,
        resolution: 32,
        texel_count: 100,
        image: { width: 64, height: 64 },
      });
    }
    if (path === "/pose" && method === "GET") {
      return json({ joint_rotations: this.pose, root_translation: [0, 0, 0] });
    }
    if (path === "/pose" && method === "PUT") {
      const joints = (body as { joints: Record<string, Vec3> }).joints;
      this.pose = { ...this.pose, ...joints };
      return json({ joint_rotations: this.pose, root_translation: [0, 0, 0] });
    }
    if (path === "/camera") return json({ ok: true });
    if (path === "/frame") {
      this.frameCounter += 1;
      return new Response(new Blob([`frame-${this.frameCounter}`]), {
        status: 200,
        headers: { "X-Render-Millis": `${10 + this.frameCounter}` },
      });
    }
    return json({ error: `unknown ${path}` }, 404);
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function tick(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("UiSession.load", () => {
  it("populates joints from /meta and the pose from GET /pose", async () => {
    const mock = new MockService();
    mock.pose.spine = [0.1, 0.2, 0.3];
    const session = new UiSession("http://base", {}, mock.fetch);
    await session.load();
    expect([...session.sliders.keys()]).toEqual(JOINTS);
    expect(session.sliders.get("spine")).toEqual([0.1, 0.2, 0.3]);
  });

  it("shows an error banner instead of crashing when unreachable", async () => {
    const mock = new MockService();
    mock.unreachable = true;
    let banner: string | null = null;
    const session = new UiSession("http://base", { onError: (m) => (banner = m) }, mock.fetch);
    await session.load();
    expect(banner).toMatch(/unreachable/);
    expect(session.meta).toBeNull();
  });

  it("round-trips the pose exactly through PUT /pose and GET /pose", async () => {
    const mock = new MockService();
    const session = new UiSession("http://base", {}, mock.fetch);
    await session.load();
    session.onSliderChange("hip_l", 2, 0.5235987755982988);
    await tick();
    const echoed = await session.client.getPose();
    expect(echoed.joint_rotations).toEqual(session.poseBody());
  });
});

describe("slider edits", () => {
  it("clamps slider values to [-pi, pi]", async () => {
    const mock = new MockService();
    const session = new UiSession("http://base", {}, mock.fetch);
    await session.load();
    session.onSliderChange("pelvis", 0, 9.0);
    expect(session.sliders.get("pelvis")![0]).toBe(SLIDER_LIMIT);
    session.onSliderChange("pelvis", 0, -9.0);
    expect(session.sliders.get("pelvis")![0]).toBe(-SLIDER_LIMIT);
  });

  it("keeps at most one PUT /pose in flight and coalesces a burst", async () => {
    const mock = new MockService();
    const session = new UiSession("http://base", {}, mock.fetch);
    await session.load();
    mock.requests.length = 0;
    mock.deferPoses = true;

    session.onSliderChange("hip_l", 0, 0.1);
    await tick();
    session.onSliderChange("hip_l", 0, 0.2);
    session.onSliderChange("hip_l", 0, 0.3);
    await tick();

    const puts = () => mock.requests.filter((r) => r.method === "PUT" && r.url.endsWith("/pose"));
    expect(puts().length).toBe(1); // burst coalesced behind the in-flight PUT
    expect(mock.deferred.length).toBe(1);
    mock.flushOne(); // first PUT completes -> one follow-up with latest value
    await tick();
    expect(puts().length).toBe(2);
    mock.flushOne();
    await tick();
    const last = puts().at(-1)!.body as { joints: Record<string, Vec3> };
    expect(last.joints.hip_l[0]).toBeCloseTo(0.3, 12);
    expect(mock.deferred.length).toBe(0);
  });

  it("preserves slider state when the service goes offline mid-drag", async () => {
    const mock = new MockService();
    let banner: string | null = null;
    const session = new UiSession("http://base", { onError: (m) => (banner = m) }, mock.fetch);
    await session.load();
    mock.unreachable = true;
    session.onSliderChange("spine", 1, 0.7);
    await tick();
    expect(banner).toMatch(/unreachable/);
    expect(session.sliders.get("spine")![1]).toBeCloseTo(0.7, 12);
  });
});

describe("frame requests", () => {
  it("keeps at most one frame request in flight and discards none displayed stale", async () => {
    const mock = new MockService();
    const frames: string[] = [];
    const session = new UiSession(
      "http://base",
      { onFrame: (blob) => void blob.text().then((t) => frames.push(t)) },
      mock.fetch,
    );
    await session.load();
    await tick();
    mock.requests.length = 0;
    mock.deferFrames = true;

    void session.refreshFrame();
    void session.refreshFrame();
    void session.refreshFrame();
    await tick();
    const gets = () => mock.requests.filter((r) => r.url.endsWith("/frame"));
    expect(gets().length).toBe(1); // single flight
    mock.flushOne();
    await tick();
    expect(gets().length).toBe(2); // coalesced follow-up for the pending edits
    mock.flushOne();
    await tick();
    expect(gets().length).toBe(2);
    await tick();
    // Displayed frames arrive in order; the latest displayed is the newest.
    expect(frames.at(-1)).toBe(`frame-${mock.frameCounter}`);
  });

  it("reports the X-Render-Millis latency of the displayed frame", async () => {
    const mock = new MockService();
    let latency = NaN;
    const session = new UiSession(
      "http://base",
      { onFrame: (_, millis) => (latency = millis) },
      mock.fetch,
    );
    await session.load();
    await tick();
    expect(latency).toBe(10 + mock.frameCounter);
    expect(session.lastRenderMillis).toBe(latency);
  });
});

describe("orbit camera", () => {
  it("radius stays positive and elevation clamped", () => {
    let params = { azimuth: 0, elevation: 0, radius: 1, target: [0, 1, 0] as Vec3 };
    for (let i = 0; i < 50; i++) params = applyOrbitDelta(params, { radiusFactor: 0.1, elevation: 1 });
    expect(params.radius).toBeGreaterThan(0);
    expect(params.elevation).toBeLessThan(Math.PI / 2);
  });

  it("extrinsics map the eye to the camera origin and look at the target", () => {
    const params = { azimuth: 0.7, elevation: 0.3, radius: 2.5, target: [0.2, 1.0, -0.3] as Vec3 };
    const cam = orbitCamera(params, 64, 64);
    const eye = orbitEye(params);
    const R = cam.rotation;
    const camEye = [0, 1, 2].map(
      (i) => R[i][0] * eye[0] + R[i][1] * eye[1] + R[i][2] * eye[2] + cam.translation[i],
    );
    expect(Math.hypot(...camEye)).toBeLessThan(1e-12);
    // The target projects onto the optical axis in front of the camera.
    const t = params.target;
    const camTarget = [0, 1, 2].map(
      (i) => R[i][0] * t[0] + R[i][1] * t[1] + R[i][2] * t[2] + cam.translation[i],
    );
    expect(Math.abs(camTarget[0])).toBeLessThan(1e-12);
    expect(Math.abs(camTarget[1])).toBeLessThan(1e-12);
    expect(camTarget[2]).toBeCloseTo(params.radius, 12);
    // Rows are orthonormal.
    for (let i = 0; i < 3; i++) {
      for (let j = 0; j < 3; j++) {
        const dot = R[i][0] * R[j][0] + R[i][1] * R[j][1] + R[i][2] * R[j][2];
        expect(dot).toBeCloseTo(i === j ? 1 : 0, 12);
      }
    }
  });

  it("PUTs the camera and refreshes the frame on orbit", async () => {
    const mock = new MockService();
    const session = new UiSession("http://base", {}, mock.fetch);
    await session.load();
    await tick();
    mock.requests.length = 0;
    session.onOrbit({ azimuth: 0.2 });
    await tick();
    const methods = mock.requests.map((r) => `${r.method} ${new URL(r.url).pathname}`);
    expect(methods).toContain("PUT /camera");
    expect(methods).toContain("GET /frame");
  });
});
