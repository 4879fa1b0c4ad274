/** Sigma override slider restricted to the sweep grid. */

export const SIGMA_MIN = 0.025;
export const SIGMA_MAX = 0.2;
export const SIGMA_STEP = 0.025;

/** The 8 legal slider values: 0.025, 0.05, ..., 0.20. */
export function sigmaGrid(): number[] {
  const n = Math.round((SIGMA_MAX - SIGMA_MIN) / SIGMA_STEP) + 1;
  return Array.from({ length: n }, (_, i) =>
    Number((SIGMA_MIN + i * SIGMA_STEP).toFixed(6)),
  );
}

/** Snap an arbitrary slider position to the nearest grid value. */
export function snapSigma(value: number): number {
  const grid = sigmaGrid();
  let best = grid[0];
  for (const g of grid) {
    if (Math.abs(g - value) < Math.abs(best - value)) best = g;
  }
  return best;
}
