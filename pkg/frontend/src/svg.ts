/** Minimal deterministic SVG plotting: scales from d3-scale, markup by hand. */

import { scaleLinear, type ScaleLinear } from "d3-scale";

export type Scale = ScaleLinear<number, number>;

const FMT = (v: number): string => {
  // fixed short rendering keeps the output stable across platforms
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes("e") ? s : String(Number(s));
};

export function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
  x: Scale;
  y: Scale;
}

export function makeFrame(
  xDomain: [number, number],
  yDomain: [number, number],
  width = 640,
  height = 420,
  margin = { top: 28, right: 16, bottom: 40, left: 54 },
): Frame {
  const x = scaleLinear().domain(xDomain).range([margin.left, width - margin.right]);
  const y = scaleLinear().domain(yDomain).range([height - margin.bottom, margin.top]);
  return { width, height, margin, x, y };
}

export function polyline(
  f: Frame,
  xs: number[],
  ys: number[],
  stroke: string,
  strokeWidth = 1.5,
  cls = "",
): string {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (!Number.isFinite(xs[i]) || !Number.isFinite(ys[i])) continue;
    pts.push(`${FMT(f.x(xs[i]))},${FMT(f.y(ys[i]))}`);
  }
  const klass = cls ? ` class="${cls}"` : "";
  return `<polyline${klass} fill="none" stroke="${stroke}" stroke-width="${strokeWidth}" points="${pts.join(" ")}"/>`;
}

export function axes(f: Frame, xLabel: string, yLabel: string): string {
  const parts: string[] = [];
  const x0 = f.margin.left;
  const x1 = f.width - f.margin.right;
  const y0 = f.height - f.margin.bottom;
  const y1 = f.margin.top;
  parts.push(`<line stroke="black" x1="${FMT(x0)}" y1="${FMT(y0)}" x2="${FMT(x1)}" y2="${FMT(y0)}"/>`);
  parts.push(`<line stroke="black" x1="${FMT(x0)}" y1="${FMT(y0)}" x2="${FMT(x0)}" y2="${FMT(y1)}"/>`);
  for (const t of f.x.ticks(7)) {
    const px = FMT(f.x(t));
    parts.push(`<line stroke="black" x1="${px}" y1="${FMT(y0)}" x2="${px}" y2="${FMT(y0 + 5)}"/>`);
    parts.push(`<text font-size="11" text-anchor="middle" x="${px}" y="${FMT(y0 + 18)}">${FMT(t)}</text>`);
  }
  for (const t of f.y.ticks(6)) {
    const py = FMT(f.y(t));
    parts.push(`<line stroke="black" x1="${FMT(x0 - 5)}" y1="${py}" x2="${FMT(x0)}" y2="${py}"/>`);
    parts.push(`<text font-size="11" text-anchor="end" x="${FMT(x0 - 8)}" y="${FMT(Number(py) + 4)}">${FMT(t)}</text>`);
  }
  parts.push(
    `<text font-size="12" text-anchor="middle" x="${FMT((x0 + x1) / 2)}" y="${FMT(f.height - 6)}">${esc(xLabel)}</text>`,
  );
  parts.push(
    `<text font-size="12" text-anchor="middle" transform="rotate(-90 14 ${FMT((y0 + y1) / 2)})" x="14" y="${FMT((y0 + y1) / 2)}">${esc(yLabel)}</text>`,
  );
  return parts.join("\n");
}

export function bandRect(
  f: Frame,
  xLo: number,
  xHi: number,
  cls = "spinodal-band",
  fill = "#dddddd",
): string {
  const left = Math.min(f.x(xLo), f.x(xHi));
  const w = Math.abs(f.x(xHi) - f.x(xLo));
  const top = f.margin.top;
  const h = f.height - f.margin.bottom - top;
  return `<rect class="${cls}" fill="${fill}" x="${FMT(left)}" y="${FMT(top)}" width="${FMT(w)}" height="${FMT(h)}"/>`;
}

export function title(f: Frame, text: string): string {
  return `<text font-size="13" font-weight="bold" text-anchor="middle" x="${FMT(f.width / 2)}" y="17">${esc(text)}</text>`;
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    `<rect fill="white" x="0" y="0" width="${width}" height="${height}"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

/** Small-multiple layout: translate group per panel. */
export function group(tx: number, ty: number, body: string[]): string {
  return `<g transform="translate(${FMT(tx)} ${FMT(ty)})">\n${body.join("\n")}\n</g>`;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const span = hi - lo;
  return [lo - pad * span, hi + pad * span];
}

export function parseRange(spec: string | undefined): [number, number] | null {
  if (!spec) return null;
  const parts = spec.split(":").map(Number);
  if (parts.length !== 2 || parts.some((v) => !Number.isFinite(v))) {
    throw new Error(`range must be "lo:hi", got ${spec}`);
  }
  return [parts[0], parts[1]];
}
