/** Render-state projection: turn the session cloud plus the view
 * settings into per-point screen positions and colors. Pure functions
 * so the render path is testable without a canvas. */

import { BACKGROUND_COLOR, colorForId, Rgb } from "./colors.js";
import { Cloud } from "./protocol.js";

export interface Camera {
  /** look-at target in world space */
  center: [number, number, number];
  /** orbit angles, radians */
  yaw: number;
  pitch: number;
  distance: number;
}

export interface ViewState {
  camera: Camera;
  pointSizePx: number;
  activeObjectId: number;
  /** null shows every scan; otherwise only the listed scan indices */
  timeFilter: number[] | null;
}

export function defaultView(): ViewState {
  return {
    camera: { center: [0, 0, 0], yaw: 0.5, pitch: 0.6, distance: 40 },
    pointSizePx: 2,
    activeObjectId: 1,
    timeFilter: null,
  };
}

export function setActiveObject(view: ViewState, id: number): ViewState {
  if (id < 1) {
    throw new Error("active object id must be >= 1");
  }
  return { ...view, activeObjectId: id };
}

export interface RenderedPoint {
  pointIndex: number;
  x: number;
  y: number;
  depth: number;
  color: Rgb;
}

/** Orbit camera basis: world -> camera-space axes. */
function cameraBasis(camera: Camera) {
  const cy = Math.cos(camera.yaw);
  const sy = Math.sin(camera.yaw);
  const cp = Math.cos(camera.pitch);
  const sp = Math.sin(camera.pitch);
  // forward points from the eye to the center
  const forward = [cy * cp, sy * cp, -sp];
  const right = [-sy, cy, 0];
  const up = [
    right[1] * forward[2] - right[2] * forward[1],
    right[2] * forward[0] - right[0] * forward[2],
    right[0] * forward[1] - right[1] * forward[0],
  ];
  return { forward, right, up };
}

/**
 * Project the cloud to screen space with the time filter applied and
 * points colored by their current object id (highlights override).
 */
export function renderCloud(
  cloud: Cloud,
  view: ViewState,
  width: number,
  height: number,
  highlight: Set<number> = new Set(),
): RenderedPoint[] {
  const { forward, right, up } = cameraBasis(view.camera);
  const [cx, cy, cz] = view.camera.center;
  const eye = [
    cx - forward[0] * view.camera.distance,
    cy - forward[1] * view.camera.distance,
    cz - forward[2] * view.camera.distance,
  ];
  const focal = (0.5 * Math.min(width, height)) / Math.tan(0.4);
  const filter = view.timeFilter === null ? null : new Set(view.timeFilter);
  const out: RenderedPoint[] = [];
  const n = cloud.header.count;
  for (let p = 0; p < n; p++) {
    if (filter !== null && !filter.has(cloud.scanIndex[p])) {
      continue;
    }
    const dx = cloud.positions[3 * p] - eye[0];
    const dy = cloud.positions[3 * p + 1] - eye[1];
    const dz = cloud.positions[3 * p + 2] - eye[2];
    const depth = dx * forward[0] + dy * forward[1] + dz * forward[2];
    if (depth <= 1e-6) {
      continue; // behind the camera
    }
    const sx = dx * right[0] + dy * right[1] + dz * right[2];
    const sy2 = dx * up[0] + dy * up[1] + dz * up[2];
    const color = highlight.has(p)
      ? ([1, 1, 1] as Rgb)
      : colorForId(cloud.ids[p]);
    out.push({
      pointIndex: p,
      x: width / 2 + (focal * sx) / depth,
      y: height / 2 - (focal * sy2) / depth,
      depth,
      color,
    });
  }
  return out;
}

/** True when every rendered point wears the neutral background color. */
export function isUniformBackground(points: RenderedPoint[]): boolean {
  return points.every(
    (p) =>
      p.color[0] === BACKGROUND_COLOR[0] &&
      p.color[1] === BACKGROUND_COLOR[1] &&
      p.color[2] === BACKGROUND_COLOR[2],
  );
}
