/** Small SVG-string helpers.
 *
 * Panels are pure functions payload -> SVG markup, so they are testable
 * without a DOM and trivially swappable for a chart library later.
 */

export const PARETO_COLOR = "#d62728";
export const DOMINATED_COLOR = "#1f77b4";
export const EXCLUDED_COLOR = "#8a8a8a";

export interface Scale {
  (value: number): number;
  readonly domain: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale & {
    domain: [number, number];
  };
  (fn as { domain: [number, number] }).domain = domain;
  return fn;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  if (values.length === 0) return [0, 1];
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const span = hi - lo;
  return [lo - pad * span, hi + pad * span];
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function svgDocument(width: number, height: number, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">` +
    body +
    "</svg>"
  );
}

export function axisLabels(
  width: number,
  height: number,
  xLabel: string,
  yLabel: string,
): string {
  return (
    `<text x="${width / 2}" y="${height - 4}" text-anchor="middle" font-size="11">` +
    `${escapeXml(xLabel)}</text>` +
    `<text x="10" y="${height / 2}" text-anchor="middle" font-size="11" ` +
    `transform="rotate(-90 10 ${height / 2})">${escapeXml(yLabel)}</text>`
  );
}

/** Viridis-like ramp (five anchors, linear blend); enough for heatmaps. */
export function colorRamp(t: number): string {
  const anchors: [number, number, number][] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
  ];
  const clamped = Math.max(0, Math.min(1, t));
  const scaled = clamped * (anchors.length - 1);
  const i = Math.min(Math.floor(scaled), anchors.length - 2);
  const frac = scaled - i;
  const a = anchors[i]!;
  const b = anchors[i + 1]!;
  const mix = (m: number, n: number) => Math.round(m + (n - m) * frac);
  return `rgb(${mix(a[0], b[0])},${mix(a[1], b[1])},${mix(a[2], b[2])})`;
}
