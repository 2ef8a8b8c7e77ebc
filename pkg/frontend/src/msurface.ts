/** Transferred-mass surface: m12 against each parameter of the sweep. */

import { join } from "node:path";
import { pathToFileURL } from "node:url";
import { readCsv, requireColumns, SchemaError } from "./data.js";
import {
  axes,
  document,
  extent,
  group,
  makeFrame,
  parseRange,
  polyline,
  title,
} from "./svg.js";
import { runScript, type FigureArgs } from "./cli.js";

function grayShade(i: number, n: number): string {
  const level = n <= 1 ? 0 : Math.round((i / (n - 1)) * 160);
  const hex = level.toString(16).padStart(2, "0");
  return `#${hex}${hex}${hex}`;
}

export function renderMsurface(args: FigureArgs): string {
  const path = join(args.inDir, "mtable.csv");
  const cols = readCsv(path);
  requireColumns(cols, ["m1", "sigma_tilde", "m12", "converged"], path);
  const n = cols.m1.length;
  if (n === 0) throw new SchemaError(`${path}: empty table`);

  const m1Vals = [...new Set(cols.m1)].sort((a, b) => a - b);
  const sigVals = [...new Set(cols.sigma_tilde)].sort((a, b) => a - b);
  const cell = new Map<string, number>();
  for (let i = 0; i < n; i++) {
    if (cols.converged[i] === 0) continue;
    cell.set(`${cols.m1[i]}|${cols.sigma_tilde[i]}`, cols.m12[i]);
  }

  const panelW = 360;
  const panelH = 300;
  const yDom = parseRange(args.yrange) ?? extent(cols.m12, 0.08);

  // panel A: m12 vs m1, one curve per tilt
  const fA = makeFrame(parseRange(args.xrange) ?? extent(m1Vals), yDom, panelW, panelH);
  const panelA: string[] = [title(fA, "m12 vs m1")];
  sigVals.forEach((s, i) => {
    const ys = m1Vals.map((m) => cell.get(`${m}|${s}`) ?? NaN);
    panelA.push(polyline(fA, m1Vals, ys, grayShade(i, sigVals.length), 1.5, "vs-m1"));
  });
  panelA.push(axes(fA, "m1", "m12"));

  // panel B: m12 vs tilt, one curve per m1
  const fB = makeFrame(extent(sigVals), yDom, panelW, panelH);
  const panelB: string[] = [title(fB, "m12 vs sigma")];
  m1Vals.forEach((m, i) => {
    const ys = sigVals.map((s) => cell.get(`${m}|${s}`) ?? NaN);
    panelB.push(polyline(fB, sigVals, ys, grayShade(i, m1Vals.length), 1.5, "vs-sigma"));
  });
  panelB.push(axes(fB, "sigma_tilde", "m12"));

  return document(2 * panelW, panelH, [group(0, 0, panelA), group(panelW, 0, panelB)]);
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  runScript(renderMsurface);
}
