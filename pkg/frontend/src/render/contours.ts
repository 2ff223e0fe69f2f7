/** Posterior-mean heatmaps for every parameter pair, one sheet per objective.
 *
 * Grids arrive as resolution x resolution posterior means; rendering is a
 * plain cell raster (no client-side interpolation beyond the color ramp).
 */

import type { ContourGrid, DashboardPayload } from "../types.js";
import { colorRamp, escapeXml, svgDocument } from "./svg.js";

const CELL_SIZE = 4;
const MARGIN = { left: 46, right: 10, top: 24, bottom: 34 };

export function renderContourPanel(grid: ContourGrid): string {
  const rows = grid.mean.length;
  const cols = rows > 0 ? grid.mean[0]!.length : 0;
  const flat = grid.mean.flat();
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const span = hi - lo || 1;
  const width = MARGIN.left + cols * CELL_SIZE + MARGIN.right;
  const height = MARGIN.top + rows * CELL_SIZE + MARGIN.bottom;

  let cells = "";
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      const value = grid.mean[i]![j]!;
      const color = colorRamp((value - lo) / span);
      // mean[i][j]: i indexes the x parameter, j the y parameter; y grows up
      const px = MARGIN.left + i * CELL_SIZE;
      const py = MARGIN.top + (rows - 1 - j) * CELL_SIZE;
      cells += `<rect x="${px}" y="${py}" width="${CELL_SIZE}" height="${CELL_SIZE}" fill="${color}"/>`;
    }
  }
  const fixed = Object.entries(grid.fixed)
    .map(([k, v]) => `${k}=${v.toPrecision(3)}`)
    .join(", ");
  const title =
    `<text x="${width / 2}" y="14" text-anchor="middle" font-size="11">` +
    `${escapeXml(`${grid.objective} (${fixed})`)}</text>`;
  const labels =
    `<text x="${width / 2}" y="${height - 6}" text-anchor="middle" font-size="10">` +
    `${escapeXml(grid.x)}</text>` +
    `<text x="12" y="${height / 2}" text-anchor="middle" font-size="10" ` +
    `transform="rotate(-90 12 ${height / 2})">${escapeXml(grid.y)}</text>`;
  return svgDocument(width, height, cells + title + labels);
}

export function renderContours(payload: DashboardPayload, objective?: string): string {
  const grids = payload.contours.filter(
    (g) => objective === undefined || g.objective === objective,
  );
  return grids.map(renderContourPanel).join("");
}
