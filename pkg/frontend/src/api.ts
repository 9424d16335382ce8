/** Typed client for the skinsplat render service (HTTP API version 1). */

export interface Meta {
  api_version: number;
  joints: string[];
  resolution: number | null;
  texel_count: number;
  image: { width: number; height: number };
}

export type Vec3 = [number, number, number];

export interface PoseDoc {
  joint_rotations: Record<string, Vec3>;
  root_translation: Vec3;
}

export interface CameraDoc {
  schema_version: number;
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  rotation: number[][];
  translation: number[];
  width: number;
  height: number;
  near: number;
}

export interface FrameResult {
  blob: Blob;
  /** Render latency reported by the service's X-Render-Millis header. */
  renderMillis: number;
}

/** fetch-compatible function, injectable for tests. */
export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ServiceError(detail, response.status);
    }
    return response;
  }

  async meta(): Promise<Meta> {
    return (await this.request("/meta")).json() as Promise<Meta>;
  }

  async getPose(): Promise<PoseDoc> {
    return (await this.request("/pose")).json() as Promise<PoseDoc>;
  }

  async putPose(joints: Record<string, Vec3>): Promise<PoseDoc> {
    const response = await this.request("/pose", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ joints }),
    });
    return response.json() as Promise<PoseDoc>;
  }

  async putCamera(camera: CameraDoc): Promise<void> {
    await this.request("/camera", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(camera),
    });
  }

  async frame(): Promise<FrameResult> {
    const response = await this.request("/frame");
    const header = response.headers.get("X-Render-Millis");
    return {
      blob: await response.blob(),
      renderMillis: header === null ? NaN : parseFloat(header),
    };
  }
}
