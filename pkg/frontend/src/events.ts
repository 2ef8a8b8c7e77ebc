/** Event diagram of a limit-dynamics run: masses, multiplier and jumps. */

import { join } from "node:path";
import { pathToFileURL } from "node:url";
import { readCsv, readEvents, readMeta, requireColumns } from "./data.js";
import {
  axes,
  document,
  esc,
  extent,
  group,
  makeFrame,
  parseRange,
  polyline,
  title,
} from "./svg.js";
import { runScript, type FigureArgs } from "./cli.js";

const KIND_ABBR: Record<string, string> = {
  switching: "sw",
  "inverse-switching": "isw",
  splitting: "sp",
  "merging-continuous": "me(c)",
  "merging-discontinuous": "me(d)",
};

export function renderEvents(args: FigureArgs): string {
  const trajPath = join(args.inDir, "trajectory.csv");
  const traj = readCsv(trajPath);
  requireColumns(traj, ["t", "m_minus", "m_zero", "m_plus", "sigma", "phi"], trajPath);
  const events = readEvents(args.inDir);
  const meta = readMeta(args.inDir);
  const sStar = meta.landmarks.sigma_star;

  const panelW = 680;
  const panelH = 250;
  const xDom = parseRange(args.xrange) ?? extent(traj.t, 0.02);

  // top: masses with event markers
  const fM = makeFrame(xDom, [-0.04, 1.04], panelW, panelH);
  const top: string[] = [title(fM, `masses and events (${meta.name})`)];
  top.push(polyline(fM, traj.t, traj.m_minus, "#000000", 1.6, "m-minus"));
  top.push(polyline(fM, traj.t, traj.m_zero, "#999999", 1.6, "m-zero"));
  top.push(polyline(fM, traj.t, traj.m_plus, "#444444", 1.6, "m-plus"));
  events.forEach((ev) => {
    const px = fM.x(ev.t).toPrecision(6);
    top.push(
      `<line class="event-${esc(ev.kind)}" stroke="#aa3333" stroke-dasharray="3 3" x1="${px}" y1="${fM.margin.top}" x2="${px}" y2="${fM.height - fM.margin.bottom}"/>`,
    );
    const label = KIND_ABBR[ev.kind] ?? ev.kind;
    top.push(
      `<text font-size="10" fill="#aa3333" text-anchor="middle" x="${px}" y="${fM.margin.top - 4}">${esc(label)}</text>`,
    );
  });
  top.push(axes(fM, "t", "masses"));

  // bottom: multiplier with the spinodal edge levels
  const yDom = parseRange(args.yrange) ?? extent([...traj.sigma, sStar, -sStar], 0.08);
  const fS = makeFrame(xDom, yDom, panelW, panelH);
  const bottom: string[] = [];
  for (const level of [sStar, -sStar]) {
    const py = fS.y(level).toPrecision(6);
    bottom.push(
      `<line class="sigma-star-level" stroke="#bbbbbb" stroke-dasharray="5 4" x1="${fS.margin.left}" y1="${py}" x2="${fS.width - fS.margin.right}" y2="${py}"/>`,
    );
  }
  bottom.push(polyline(fS, traj.t, traj.sigma, "#000000", 1.6, "sigma"));
  events.forEach((ev) => {
    const px = fS.x(ev.t).toPrecision(6);
    bottom.push(
      `<line stroke="#aa3333" stroke-dasharray="3 3" x1="${px}" y1="${fS.margin.top}" x2="${px}" y2="${fS.height - fS.margin.bottom}"/>`,
    );
  });
  bottom.push(axes(fS, "t", "sigma"));

  return document(panelW, 2 * panelH, [group(0, 0, top), group(0, panelH, bottom)]);
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  runScript(renderEvents);
}
