/** Heatmap upscaling and color mapping for canvas overlays. */

import type { HeatmapPayload } from "./api.js";

export class PayloadShapeError extends Error {}

/**
 * Nearest-neighbor upscale of a row-major grid to (outWidth x outHeight).
 * Each output pixel takes the value of the grid cell containing it.
 */
export function upscaleNearest(
  payload: HeatmapPayload,
  outWidth: number,
  outHeight: number,
): Float32Array {
  const [h, w] = payload.dims;
  if (h <= 0 || w <= 0 || payload.data.length !== h * w) {
    throw new PayloadShapeError(
      `payload dims ${h}x${w} inconsistent with ${payload.data.length} values`,
    );
  }
  const out = new Float32Array(outWidth * outHeight);
  for (let y = 0; y < outHeight; y++) {
    const sy = Math.min(h - 1, Math.floor((y * h) / outHeight));
    for (let x = 0; x < outWidth; x++) {
      const sx = Math.min(w - 1, Math.floor((x * w) / outWidth));
      out[y * outWidth + x] = payload.data[sy * w + sx];
    }
  }
  return out;
}

/**
 * Values to RGBA bytes: a red overlay whose alpha follows the value
 * min-max normalized over the grid.  A constant grid renders with uniform
 * mid alpha.
 */
export function toRgba(
  values: Float32Array,
  maxAlpha = 160,
): Uint8ClampedArray<ArrayBuffer> {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const range = hi - lo;
  const out = new Uint8ClampedArray(new ArrayBuffer(values.length * 4));
  for (let i = 0; i < values.length; i++) {
    const t = range > 0 ? (values[i] - lo) / range : 0.5;
    out[i * 4] = 255;
    out[i * 4 + 1] = 40;
    out[i * 4 + 2] = 40;
    out[i * 4 + 3] = Math.round(t * maxAlpha);
  }
  return out;
}
