/** Stable object-id coloring: the same id always maps to the same
 * color, across deltas, sessions and reloads. */

export type Rgb = [number, number, number];

/** Neutral gray for unlabeled points. */
export const BACKGROUND_COLOR: Rgb = [0.55, 0.55, 0.55];

/** 32-bit integer hash (xorshift-multiply avalanche). */
function hashId(id: number): number {
  let h = id | 0;
  h = Math.imul(h ^ (h >>> 16), 0x45d9f3b);
  h = Math.imul(h ^ (h >>> 16), 0x45d9f3b);
  h ^= h >>> 16;
  return h >>> 0;
}

/**
 * Deterministic id -> color. Hue from the hash, fixed vivid
 * saturation/value band so adjacent ids stay distinguishable.
 */
export function colorForId(id: number): Rgb {
  if (id === 0) {
    return BACKGROUND_COLOR;
  }
  const h = hashId(id);
  const hue = (h % 360) / 360;
  const sat = 0.55 + ((h >>> 9) % 40) / 100; // 0.55..0.95
  const val = 0.7 + ((h >>> 17) % 30) / 100; // 0.70..1.00
  return hsvToRgb(hue, sat, val);
}

export function hsvToRgb(h: number, s: number, v: number): Rgb {
  const i = Math.floor(h * 6);
  const f = h * 6 - i;
  const p = v * (1 - s);
  const q = v * (1 - f * s);
  const t = v * (1 - (1 - f) * s);
  switch (i % 6) {
    case 0: return [v, t, p];
    case 1: return [q, v, p];
    case 2: return [p, v, t];
    case 3: return [p, q, v];
    case 4: return [t, p, v];
    default: return [v, p, q];
  }
}

export function rgbToCss([r, g, b]: Rgb): string {
  const c = (x: number) => Math.round(x * 255);
  return `rgb(${c(r)}, ${c(g)}, ${c(b)})`;
}
