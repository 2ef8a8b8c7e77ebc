/** Density snapshot strip: one panel per stored time, spinodal band shaded. */

import { pathToFileURL } from "node:url";
import { listSnapshots, readCsv, readMeta, requireColumns } from "./data.js";
import {
  axes,
  bandRect,
  document,
  extent,
  group,
  makeFrame,
  parseRange,
  polyline,
  title,
} from "./svg.js";
import { runScript, type FigureArgs } from "./cli.js";

export function renderSnapshots(args: FigureArgs): string {
  const meta = readMeta(args.inDir);
  const snaps = listSnapshots(args.inDir);
  const xs = meta.landmarks.x_star;

  const panelW = 300;
  const panelH = 220;
  const perRow = Math.min(3, snaps.length);
  const rows = Math.ceil(snaps.length / perRow);
  const width = panelW * perRow;
  const height = panelH * rows;

  const body: string[] = [];
  snaps.forEach((snap, i) => {
    const cols = readCsv(snap.path);
    requireColumns(cols, ["x", "rho"], snap.path);
    const xDom = parseRange(args.xrange) ?? [-2.2 * meta.landmarks.x_starstar,
      2.2 * meta.landmarks.x_starstar];
    const yDom = parseRange(args.yrange) ?? extent(cols.rho, 0.08);
    const f = makeFrame(xDom, [Math.min(0, yDom[0]), yDom[1]], panelW, panelH, {
      top: 24,
      right: 8,
      bottom: 34,
      left: 46,
    });
    const panel = [
      bandRect(f, -xs, xs),
      polyline(f, cols.x, cols.rho, "#000000", 1.4, "density"),
      axes(f, "x", "rho"),
      title(f, `t = ${snap.t}`),
    ];
    body.push(group((i % perRow) * panelW, Math.floor(i / perRow) * panelH, panel));
  });
  return document(width, height, body);
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  runScript(renderSnapshots);
}
