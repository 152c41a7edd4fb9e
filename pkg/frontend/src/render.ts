/** Pixel production for the live view.
 *
 * Everything that decides pixel values is pure over RGBA buffers so it
 * runs under tests without a canvas; the thin canvas glue lives in the
 * app entry. Rasters draw at an integer scale with smoothing disabled,
 * one raster cell to an n-by-n pixel block, so nothing on screen is
 * interpolated into existence.
 */

import type { Raster } from "./protocol.js";

export type Rgba = readonly [number, number, number, number];

export const BACKGROUND_RGBA: Rgba = [18, 24, 34, 255];
export const VESSEL_RGBA: Rgba = [170, 192, 214, 255];
export const GUIDEWIRE_RGBA: Rgba = [255, 196, 64, 255];

/** Opaque two-tone image of a raster: `on` where cells are set. */
export function rasterPixels(r: Raster, on: Rgba, off: Rgba): Uint8ClampedArray {
  const px = new Uint8ClampedArray(r.height * r.width * 4);
  for (let i = 0; i < r.cells.length; i++) {
    const c = r.cells[i] ? on : off;
    px[4 * i] = c[0];
    px[4 * i + 1] = c[1];
    px[4 * i + 2] = c[2];
    px[4 * i + 3] = c[3];
  }
  return px;
}

/** Overlay image: `on` where cells are set, transparent elsewhere, so
 * an all-false raster contributes no visible pixel at all. */
export function overlayPixels(r: Raster, on: Rgba): Uint8ClampedArray {
  const px = new Uint8ClampedArray(r.height * r.width * 4);
  for (let i = 0; i < r.cells.length; i++) {
    if (!r.cells[i]) continue;
    px[4 * i] = on[0];
    px[4 * i + 1] = on[1];
    px[4 * i + 2] = on[2];
    px[4 * i + 3] = on[3];
  }
  return px;
}

/** Largest integer scale that fits the raster into the viewport,
 * never below 1. */
export function fitScale(
  height: number,
  width: number,
  maxHeight: number,
  maxWidth: number,
): number {
  const s = Math.min(
    Math.floor(maxHeight / height),
    Math.floor(maxWidth / width),
  );
  return Math.max(1, s);
}

/** Fraction of a meter bar to fill, clamped into [0, 1]. */
export function barFraction(value: number, scale: number): number {
  if (!Number.isFinite(value) || scale <= 0) return 0;
  return Math.min(1, Math.max(0, value / scale));
}
