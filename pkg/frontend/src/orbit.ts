/** Orbit-camera parameterization and its conversion to service extrinsics.
 *
 * The camera orbits a target point on a sphere (azimuth around +y,
 * elevation toward +y) and always looks at the target. Extrinsics follow
 * the service convention: rows [right; down; forward], world-to-camera.
 */

import type { CameraDoc, Vec3 } from "./api";

export interface OrbitParams {
  azimuth: number; // radians around the +y axis
  elevation: number; // radians above the horizon
  radius: number; // > 0, meters
  target: Vec3;
}

export interface OrbitDelta {
  azimuth?: number;
  elevation?: number;
  radiusFactor?: number;
}

const MAX_ELEVATION = Math.PI / 2 - 0.01;
const MIN_RADIUS = 0.05;

export function applyOrbitDelta(params: OrbitParams, delta: OrbitDelta): OrbitParams {
  const radius = Math.max(MIN_RADIUS, params.radius * (delta.radiusFactor ?? 1));
  return {
    azimuth: params.azimuth + (delta.azimuth ?? 0),
    elevation: clamp(params.elevation + (delta.elevation ?? 0), -MAX_ELEVATION, MAX_ELEVATION),
    radius,
    target: params.target,
  };
}

export function orbitEye(params: OrbitParams): Vec3 {
  const ce = Math.cos(params.elevation);
  return [
    params.target[0] + params.radius * Math.sin(params.azimuth) * ce,
    params.target[1] + params.radius * Math.sin(params.elevation),
    params.target[2] + params.radius * Math.cos(params.azimuth) * ce,
  ];
}

export function orbitCamera(
  params: OrbitParams,
  width: number,
  height: number,
  fovDeg = 55,
  near = 0.01,
): CameraDoc {
  if (params.radius <= 0) throw new Error("orbit radius must be positive");
  const eye = orbitEye(params);
  const forward = normalize(sub(params.target, eye));
  const right = normalize(cross(forward, [0, 1, 0]));
  const down = cross(forward, right);
  const rotation = [right, down, forward].map((row) => [...row]);
  const translation = [
    -dot(right, eye),
    -dot(down, eye),
    -dot(forward, eye),
  ];
  const f = (0.5 * width) / Math.tan((0.5 * fovDeg * Math.PI) / 180);
  return {
    schema_version: 1,
    fx: f,
    fy: f,
    cx: width / 2,
    cy: height / 2,
    rotation,
    translation,
    width,
    height,
    near,
  };
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  if (n < 1e-12) throw new Error("degenerate orbit direction");
  return [v[0] / n, v[1] / n, v[2] / n];
}
