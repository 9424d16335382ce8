/** UI session state machine.
 *
 * Network discipline: per resource (pose, camera, frame) at most one
 * request is in flight; edits arriving meanwhile are coalesced into a
 * single follow-up sync. Frame responses carry a generation number and
 * anything older than the latest issued request is discarded.
 */

import { ServiceClient, type FetchLike, type Meta, type Vec3 } from "./api";
import {
  applyOrbitDelta,
  orbitCamera,
  type OrbitDelta,
  type OrbitParams,
} from "./orbit";

export const SLIDER_LIMIT = Math.PI;

export interface SessionEvents {
  /** New frame to display, with the service's reported render latency. */
  onFrame?: (blob: Blob, renderMillis: number) => void;
  /** Error banner text, or null to clear it. */
  onError?: (message: string | null) => void;
  /** Pose state changed (load or slider edit). */
  onPose?: (sliders: ReadonlyMap<string, Vec3>) => void;
}

export class UiSession {
  readonly client: ServiceClient;
  meta: Meta | null = null;
  sliders = new Map<string, Vec3>();
  orbit: OrbitParams = { azimuth: 0.5, elevation: 0.1, radius: 3.0, target: [0, 1, 0] };
  lastRenderMillis = NaN;

  private events: SessionEvents;
  private poseInFlight = false;
  private poseDirty = false;
  private cameraInFlight = false;
  private cameraDirty = false;
  private frameInFlight = false;
  private framePending = false;
  private frameGeneration = 0;

  constructor(baseUrl: string, events: SessionEvents = {}, fetchFn?: FetchLike) {
    this.client = new ServiceClient(baseUrl, fetchFn);
    this.events = events;
  }

  /** Populate the joint list from /meta and the initial pose from /pose. */
  async load(): Promise<void> {
    try {
      this.meta = await this.client.meta();
      const pose = await this.client.getPose();
      this.sliders = new Map(
        this.meta.joints.map((name) => [
          name,
          (pose.joint_rotations[name] ?? [0, 0, 0]) as Vec3,
        ]),
      );
      this.events.onError?.(null);
      this.events.onPose?.(this.sliders);
      await this.refreshFrame();
    } catch (err) {
      this.events.onError?.(errorText(err));
    }
  }

  /** Slider edit: clamp, update local state, sync pose then refresh frame. */
  onSliderChange(joint: string, component: 0 | 1 | 2, value: number): void {
    const current = this.sliders.get(joint);
    if (!current) return;
    const next: Vec3 = [...current];
    next[component] = clamp(value, -SLIDER_LIMIT, SLIDER_LIMIT);
    this.sliders.set(joint, next);
    this.events.onPose?.(this.sliders);
    void this.syncPose();
  }

  /** Orbit-camera edit: recompute extrinsics, PUT /camera, refresh frame. */
  onOrbit(delta: OrbitDelta): void {
    this.orbit = applyOrbitDelta(this.orbit, delta);
    void this.syncCamera();
  }

  private async syncPose(): Promise<void> {
    if (this.poseInFlight) {
      this.poseDirty = true;
      return;
    }
    this.poseInFlight = true;
    try {
      do {
        this.poseDirty = false;
        await this.client.putPose(Object.fromEntries(this.sliders));
      } while (this.poseDirty);
      this.events.onError?.(null);
    } catch (err) {
      this.events.onError?.(errorText(err));
      return;
    } finally {
      this.poseInFlight = false;
    }
    await this.refreshFrame();
  }

  private async syncCamera(): Promise<void> {
    if (this.cameraInFlight) {
      this.cameraDirty = true;
      return;
    }
    if (!this.meta) return;
    this.cameraInFlight = true;
    try {
      do {
        this.cameraDirty = false;
        const { width, height } = this.meta.image;
        await this.client.putCamera(orbitCamera(this.orbit, width, height));
      } while (this.cameraDirty);
      this.events.onError?.(null);
    } catch (err) {
      this.events.onError?.(errorText(err));
      return;
    } finally {
      this.cameraInFlight = false;
    }
    await this.refreshFrame();
  }

  /** Fetch one frame; at most one in flight, stale responses discarded. */
  async refreshFrame(): Promise<void> {
    if (this.frameInFlight) {
      this.framePending = true;
      return;
    }
    this.frameInFlight = true;
    try {
      do {
        this.framePending = false;
        const generation = ++this.frameGeneration;
        const frame = await this.client.frame();
        if (generation < this.frameGeneration) continue; // stale: discard
        this.lastRenderMillis = frame.renderMillis;
        this.events.onFrame?.(frame.blob, frame.renderMillis);
      } while (this.framePending);
      this.events.onError?.(null);
    } catch (err) {
      this.events.onError?.(errorText(err));
    } finally {
      this.frameInFlight = false;
    }
  }

  /** Serialize the UI pose exactly as PUT /pose sends it (for tests). */
  poseBody(): Record<string, Vec3> {
    return Object.fromEntries(this.sliders);
  }
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

function errorText(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
