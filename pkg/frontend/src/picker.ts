/** Screen-space picking: map a cursor position to the nearest rendered
 * point and produce the click message for the active object. */

import { RenderedPoint } from "./view.js";
import { Cloud } from "./protocol.js";

export const DEFAULT_PICK_RADIUS_PX = 8;

export interface PickResult {
  pointIndex: number;
  /** world position of the picked point, sent to the server for snapping */
  pos: [number, number, number];
}

/**
 * Nearest rendered point within the pick radius; closer points win,
 * screen distance breaks depth ties. Returns null on a miss (the
 * caller shows a "no target" cue, mirroring server rejection).
 */
export function pickPoint(
  rendered: RenderedPoint[],
  cloud: Cloud,
  screenX: number,
  screenY: number,
  radiusPx: number = DEFAULT_PICK_RADIUS_PX,
): PickResult | null {
  let best: RenderedPoint | null = null;
  let bestKey: [number, number] | null = null;
  const r2 = radiusPx * radiusPx;
  for (const p of rendered) {
    const dx = p.x - screenX;
    const dy = p.y - screenY;
    const d2 = dx * dx + dy * dy;
    if (d2 > r2) {
      continue;
    }
    const key: [number, number] = [d2, p.depth];
    if (bestKey === null || key[0] < bestKey[0] || (key[0] === bestKey[0] && key[1] < bestKey[1])) {
      best = p;
      bestKey = key;
    }
  }
  if (best === null) {
    return null;
  }
  const i = best.pointIndex;
  return {
    pointIndex: i,
    pos: [
      cloud.positions[3 * i],
      cloud.positions[3 * i + 1],
      cloud.positions[3 * i + 2],
    ],
  };
}
