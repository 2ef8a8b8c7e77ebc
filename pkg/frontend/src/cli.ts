/** Shared flag handling for the figure scripts: --in, --out, --xrange, --yrange. */

import { parseArgs } from "node:util";
import { writeFileSync } from "node:fs";

export interface FigureArgs {
  inDir: string;
  outPath: string;
  xrange?: string;
  yrange?: string;
}

export function figureArgs(argv: string[]): FigureArgs {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: "string" },
      out: { type: "string" },
      xrange: { type: "string" },
      yrange: { type: "string" },
    },
  });
  if (!values.in || !values.out) {
    throw new Error("usage: --in <artifact dir> --out <svg path> [--xrange lo:hi] [--yrange lo:hi]");
  }
  return {
    inDir: values.in,
    outPath: values.out,
    xrange: values.xrange,
    yrange: values.yrange,
  };
}

export function runScript(render: (a: FigureArgs) => string): void {
  try {
    const args = figureArgs(process.argv.slice(2));
    writeFileSync(args.outPath, render(args));
    console.log(`wrote ${args.outPath}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exitCode = 1;
  }
}
