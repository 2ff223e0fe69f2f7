/** Objective-space scatter: Pareto points red, dominated blue, excluded
 * crossed out. Coloring comes exclusively from the server's pareto flags.
 */

import type { DashboardPayload, DashboardPoint } from "../types.js";
import {
  DOMINATED_COLOR,
  EXCLUDED_COLOR,
  PARETO_COLOR,
  axisLabels,
  extent,
  linearScale,
  svgDocument,
} from "./svg.js";

const WIDTH = 460;
const HEIGHT = 360;
const MARGIN = { left: 52, right: 14, top: 12, bottom: 40 };

export function pointColor(point: DashboardPoint): string {
  if (point.excluded) return EXCLUDED_COLOR;
  return point.pareto ? PARETO_COLOR : DOMINATED_COLOR;
}

export function renderScatter(payload: DashboardPayload): string {
  const points = payload.points;
  const xs = points.map((p) => p.formation_time_h);
  const ys = points.map((p) => p.eol_cycles);
  const x = linearScale(extent(xs), [MARGIN.left, WIDTH - MARGIN.right]);
  const y = linearScale(extent(ys), [HEIGHT - MARGIN.bottom, MARGIN.top]);

  const marks = points
    .map((p) => {
      const cx = x(p.formation_time_h);
      const cy = y(p.eol_cycles);
      const color = pointColor(p);
      const cls = p.excluded ? "excluded" : p.pareto ? "pareto" : "dominated";
      const xe = Math.abs(x(p.formation_time_h + p.formation_time_se_h) - cx);
      const ye = Math.abs(y(p.eol_cycles + p.eol_se_cycles) - cy);
      const bars =
        `<line x1="${cx - xe}" y1="${cy}" x2="${cx + xe}" y2="${cy}" stroke="${color}" stroke-width="1"/>` +
        `<line x1="${cx}" y1="${cy - ye}" x2="${cx}" y2="${cy + ye}" stroke="${color}" stroke-width="1"/>`;
      const marker = p.excluded
        ? `<path d="M ${cx - 4} ${cy - 4} L ${cx + 4} ${cy + 4} M ${cx - 4} ${cy + 4} L ${cx + 4} ${cy - 4}" ` +
          `stroke="${color}" stroke-width="2" fill="none"/>`
        : `<circle cx="${cx}" cy="${cy}" r="4.5" fill="${color}"/>`;
      const label = `<text x="${cx + 6}" y="${cy - 6}" font-size="9" fill="#444">${p.batch}</text>`;
      return `<g class="point ${cls}" data-batch="${p.batch}" data-pareto="${p.pareto}">${bars}${marker}${label}</g>`;
    })
    .join("");

  const frame =
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${WIDTH - MARGIN.left - MARGIN.right}" ` +
    `height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#ccc"/>`;
  return svgDocument(
    WIDTH,
    HEIGHT,
    frame + marks + axisLabels(WIDTH, HEIGHT, "formation time [h]", "EOL [cycles]"),
  );
}
