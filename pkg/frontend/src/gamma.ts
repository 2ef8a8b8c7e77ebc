/** State and phase curves of a run against the force-law graph.
 *
 * Black: (ell, y) macroscopic state curve; dark gray: (ell, sigma_*(m_+ - m_-))
 * phase curve; light gray: the H' graph they wind around.
 */

import { join } from "node:path";
import { pathToFileURL } from "node:url";
import { readCsv, readMeta, requireColumns } from "./data.js";
import { axes, document, extent, makeFrame, parseRange, polyline, title } from "./svg.js";
import { runScript, type FigureArgs } from "./cli.js";

export function renderGamma(args: FigureArgs): string {
  const seriesPath = join(args.inDir, "series.csv");
  const series = readCsv(seriesPath);
  requireColumns(series, ["ell", "y", "m_minus", "m_plus"], seriesPath);
  const hprimePath = join(args.inDir, "hprime.csv");
  const hp = readCsv(hprimePath);
  requireColumns(hp, ["x", "hprime"], hprimePath);
  const meta = readMeta(args.inDir);
  const sStar = meta.landmarks.sigma_star;

  const phase = series.m_plus.map((mp, i) => sStar * (mp - series.m_minus[i]));
  const xDom = parseRange(args.xrange) ?? extent(series.ell);
  const yDom =
    parseRange(args.yrange) ??
    extent([...series.y, ...phase, -1.2 * sStar, 1.2 * sStar]);
  const f = makeFrame(xDom, yDom);

  const inWindow = (x: number) => x >= xDom[0] && x <= xDom[1];
  const hpX = hp.x.filter(inWindow);
  const hpY = hp.hprime.filter((_, i) => inWindow(hp.x[i]));

  return document(f.width, f.height, [
    title(f, `state and phase curves (${meta.name})`),
    polyline(f, hpX, hpY, "#cccccc", 1.2, "force-law"),
    polyline(f, series.ell, phase, "#666666", 1.6, "phase-curve"),
    polyline(f, series.ell, series.y, "#000000", 1.6, "state-curve"),
    axes(f, "ell", "y,  sigma_* (m+ - m-)"),
  ]);
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  runScript(renderGamma);
}
