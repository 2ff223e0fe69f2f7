/** Hypervolume-vs-completed-batches step trace. */

import type { DashboardPayload } from "../types.js";
import { PARETO_COLOR, axisLabels, extent, linearScale, svgDocument } from "./svg.js";

const WIDTH = 420;
const HEIGHT = 220;
const MARGIN = { left: 58, right: 12, top: 12, bottom: 36 };

export function renderHypervolumeTrace(payload: DashboardPayload): string {
  const trace = payload.hypervolume_trace;
  if (trace.length === 0) {
    return svgDocument(WIDTH, HEIGHT, `<text x="20" y="30" font-size="11">no data yet</text>`);
  }
  const x = linearScale(
    [trace[0]!.iteration, Math.max(trace[trace.length - 1]!.iteration, trace[0]!.iteration + 1)],
    [MARGIN.left, WIDTH - MARGIN.right],
  );
  const y = linearScale(
    extent(trace.map((t) => t.hypervolume)),
    [HEIGHT - MARGIN.bottom, MARGIN.top],
  );
  let d = "";
  trace.forEach((t, i) => {
    const px = x(t.iteration);
    const py = y(t.hypervolume);
    if (i === 0) {
      d += `M ${px} ${py}`;
    } else {
      d += ` H ${px} V ${py}`;
    }
  });
  const path = `<path d="${d}" fill="none" stroke="${PARETO_COLOR}" stroke-width="2"/>`;
  const dots = trace
    .map(
      (t) =>
        `<circle cx="${x(t.iteration)}" cy="${y(t.hypervolume)}" r="2.5" fill="${PARETO_COLOR}"/>`,
    )
    .join("");
  return svgDocument(
    WIDTH,
    HEIGHT,
    path + dots + axisLabels(WIDTH, HEIGHT, "completed batches", "hypervolume"),
  );
}
