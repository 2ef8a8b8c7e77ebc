import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { renderGamma } from "../src/gamma.js";
import { renderSnapshots } from "../src/snapshots.js";
import { renderMsurface } from "../src/msurface.js";
import { renderEvents } from "../src/events.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIG2 = join(HERE, "..", "fixtures", "fig2-small");
const LIMIT = join(HERE, "..", "fixtures", "limit-demo");
const MTABLE = join(HERE, "..", "fixtures", "mtable");

describe("gamma figure", () => {
  it("renders state, phase and force-law curves", () => {
    const svg = renderGamma({ inDir: FIG2, outPath: "" });
    expect(svg).toContain("<svg");
    expect(svg).toContain('class="state-curve"');
    expect(svg).toContain('class="phase-curve"');
    expect(svg).toContain('class="force-law"');
  });

  it("honors axis range flags", () => {
    const svg = renderGamma({ inDir: FIG2, outPath: "", xrange: "-1:1", yrange: "-2:2" });
    expect(svg).toContain("<svg");
  });

  it("reruns are byte-identical", () => {
    const a = renderGamma({ inDir: FIG2, outPath: "" });
    const b = renderGamma({ inDir: FIG2, outPath: "" });
    expect(a).toBe(b);
  });
});

describe("snapshot strip", () => {
  it("renders one panel per snapshot with the spinodal band", () => {
    const svg = renderSnapshots({ inDir: FIG2, outPath: "" });
    const bands = svg.match(/class="spinodal-band"/g) ?? [];
    expect(bands.length).toBe(4); // fixture stores four snapshot times
    expect(svg).toContain('class="density"');
  });

  it("band sits at the spinodal edges from metadata", () => {
    // x_* = 1 for the arctan force law; panel x-scale maps [-w, w] onto
    // [left, panelW - right], so the band rect is solvable in closed form
    const svg = renderSnapshots({ inDir: FIG2, outPath: "" });
    const m = svg.match(/class="spinodal-band"[^/]*x="([0-9.]+)" y="[0-9.]+" width="([0-9.]+)"/);
    expect(m).not.toBeNull();
    const meta = JSON.parse(readFileSync(join(FIG2, "meta.json"), "utf8"));
    const xs = meta.landmarks.x_star;
    const w = 2.2 * meta.landmarks.x_starstar;
    const left = 46;
    const right = 8;
    const scale = (300 - left - right) / (2 * w);
    const expectLeft = left + (w - xs) * scale;
    const expectWidth = 2 * xs * scale;
    expect(Number(m![1])).toBeCloseTo(expectLeft, 2);
    expect(Number(m![2])).toBeCloseTo(expectWidth, 2);
  });

  it("reruns are byte-identical", () => {
    expect(renderSnapshots({ inDir: FIG2, outPath: "" }))
      .toBe(renderSnapshots({ inDir: FIG2, outPath: "" }));
  });
});

describe("transfer-mass surface", () => {
  it("renders both panels", () => {
    const svg = renderMsurface({ inDir: MTABLE, outPath: "" });
    expect(svg).toContain("m12 vs m1");
    expect(svg).toContain("m12 vs sigma");
    const curvesA = svg.match(/class="vs-m1"/g) ?? [];
    const curvesB = svg.match(/class="vs-sigma"/g) ?? [];
    expect(curvesA.length).toBe(7); // one per tilt value
    expect(curvesB.length).toBe(5); // one per mass value
  });

  it("reruns are byte-identical", () => {
    expect(renderMsurface({ inDir: MTABLE, outPath: "" }))
      .toBe(renderMsurface({ inDir: MTABLE, outPath: "" }));
  });
});

describe("event diagram", () => {
  it("renders masses, multiplier and event markers", () => {
    const svg = renderEvents({ inDir: LIMIT, outPath: "" });
    expect(svg).toContain('class="m-zero"');
    expect(svg).toContain('class="sigma"');
    expect(svg).toContain('class="event-switching"');
    expect(svg).toContain('class="event-splitting"');
    expect(svg).toContain('class="sigma-star-level"');
  });

  it("reruns are byte-identical", () => {
    expect(renderEvents({ inDir: LIMIT, outPath: "" }))
      .toBe(renderEvents({ inDir: LIMIT, outPath: "" }));
  });
});

describe("schema diagnostics", () => {
  it("reports missing columns by name", () => {
    const dir = mkdtempSync(join(tmpdir(), "dwfig-"));
    writeFileSync(join(dir, "mtable.csv"), "a,b\n1,2\n");
    expect(() => renderMsurface({ inDir: dir, outPath: "" }))
      .toThrowError(/missing columns \[m1, sigma_tilde, m12, converged\]/);
  });
});
