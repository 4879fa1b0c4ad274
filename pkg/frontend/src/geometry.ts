/** Pure coordinate arithmetic between normalized and display space. */

export interface NormalizedClick {
  x: number; // [0, 1]
  y: number;
}

export interface DisplayRect {
  x: number; // top-left, display pixels
  y: number;
  width: number;
  height: number;
}

/**
 * Map a pointer position inside the displayed image to normalized
 * coordinates.  Returns null when the point falls outside the image, so
 * margin clicks fire no request.  Zoom cancels: the same image point gives
 * the same normalized click at any display size.
 */
export function normalizeClick(
  displayX: number,
  displayY: number,
  displayWidth: number,
  displayHeight: number,
): NormalizedClick | null {
  if (displayWidth <= 0 || displayHeight <= 0) return null;
  if (displayX < 0 || displayY < 0 || displayX > displayWidth || displayY > displayHeight) {
    return null;
  }
  return { x: displayX / displayWidth, y: displayY / displayHeight };
}

/** Normalized click back to display pixels (marker rendering). */
export function clickToDisplay(
  click: NormalizedClick,
  displayWidth: number,
  displayHeight: number,
): { x: number; y: number } {
  return { x: click.x * displayWidth, y: click.y * displayHeight };
}

/**
 * Normalized (cx, cy, w, h) bbox to a display-space rectangle.  Plain
 * multiplication by the display size, so corners are exact up to float
 * rounding at any zoom.
 */
export function bboxToDisplay(
  bbox: [number, number, number, number],
  displayWidth: number,
  displayHeight: number,
): DisplayRect {
  const [cx, cy, w, h] = bbox;
  return {
    x: (cx - w / 2) * displayWidth,
    y: (cy - h / 2) * displayHeight,
    width: w * displayWidth,
    height: h * displayHeight,
  };
}

export function rectCorners(rect: DisplayRect): [number, number][] {
  return [
    [rect.x, rect.y],
    [rect.x + rect.width, rect.y],
    [rect.x, rect.y + rect.height],
    [rect.x + rect.width, rect.y + rect.height],
  ];
}
