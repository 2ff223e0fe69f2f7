/** Marginal distributions per objective, Pareto stacked over dominated. */

import type { DashboardPayload, MarginalHistogram } from "../types.js";
import { DOMINATED_COLOR, PARETO_COLOR, escapeXml, linearScale, svgDocument } from "./svg.js";

const WIDTH = 300;
const HEIGHT = 170;
const MARGIN = { left: 30, right: 8, top: 18, bottom: 22 };

export function renderHistogram(marginal: MarginalHistogram): string {
  const edges = marginal.edges;
  const n = Math.max(edges.length - 1, 1);
  const totals = marginal.pareto_counts.map(
    (p, i) => p + (marginal.dominated_counts[i] ?? 0),
  );
  const maxCount = Math.max(1, ...totals);
  const x = linearScale(
    [edges[0] ?? 0, edges[edges.length - 1] ?? 1],
    [MARGIN.left, WIDTH - MARGIN.right],
  );
  const y = linearScale([0, maxCount], [HEIGHT - MARGIN.bottom, MARGIN.top]);

  let bars = "";
  for (let i = 0; i < n; i++) {
    const left = x(edges[i] ?? 0);
    const right = x(edges[i + 1] ?? 1);
    const width = Math.max(right - left - 1, 1);
    const dominated = marginal.dominated_counts[i] ?? 0;
    const pareto = marginal.pareto_counts[i] ?? 0;
    const base = HEIGHT - MARGIN.bottom;
    const dominatedTop = y(dominated);
    bars +=
      `<rect class="dominated" x="${left}" y="${dominatedTop}" width="${width}" ` +
      `height="${base - dominatedTop}" fill="${DOMINATED_COLOR}" opacity="0.75"/>`;
    const paretoTop = y(dominated + pareto);
    bars +=
      `<rect class="pareto" x="${left}" y="${paretoTop}" width="${width}" ` +
      `height="${dominatedTop - paretoTop}" fill="${PARETO_COLOR}" opacity="0.85"/>`;
  }
  const title =
    `<text x="${WIDTH / 2}" y="12" text-anchor="middle" font-size="11">` +
    `${escapeXml(marginal.objective)}</text>`;
  return svgDocument(WIDTH, HEIGHT, bars + title);
}

export function renderMarginals(payload: DashboardPayload): string {
  return payload.marginals.map(renderHistogram).join("");
}
