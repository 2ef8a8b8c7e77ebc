/** Loading and validation of driftwell artifacts (CSV columns, meta.json). */

import { readFileSync, readdirSync } from "node:fs";
import { join } from "node:path";
import Papa from "papaparse";

export type Columns = Record<string, number[]>;

export class SchemaError extends Error {}

/** Parse a numeric CSV into named columns. */
export function readCsv(path: string): Columns {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data as unknown as string[][];
  const header = rows[0];
  const out: Columns = {};
  header.forEach((name, j) => {
    out[name] = rows.slice(1).map((r) => Number(r[j]));
  });
  return out;
}

/** Require columns to exist; report what is present on mismatch. */
export function requireColumns(cols: Columns, needed: string[], path: string): void {
  const missing = needed.filter((c) => !(c in cols));
  if (missing.length > 0) {
    throw new SchemaError(
      `${path}: missing columns [${missing.join(", ")}]; found [${Object.keys(cols).join(", ")}]`,
    );
  }
}

export interface Meta {
  model: string;
  name: string;
  landmarks: {
    x_star: number;
    x_starstar: number;
    sigma_star: number;
    h_crit: number;
    h_star: number;
  };
}

export function readMeta(dir: string): Meta {
  const raw = JSON.parse(readFileSync(join(dir, "meta.json"), "utf8"));
  if (!raw.landmarks || typeof raw.landmarks.x_star !== "number") {
    throw new SchemaError(`${dir}/meta.json: landmarks block missing`);
  }
  return raw as Meta;
}

export interface EventEntry {
  t: number;
  kind: string;
  note: string;
  d_sigma: number;
  d_energy: number;
}

export function readEvents(dir: string): EventEntry[] {
  return JSON.parse(readFileSync(join(dir, "events.json"), "utf8")) as EventEntry[];
}

/** Snapshot files sorted by their embedded time tag. */
export function listSnapshots(dir: string): { t: number; path: string }[] {
  const snapDir = join(dir, "snapshots");
  const entries = readdirSync(snapDir)
    .filter((f) => f.startsWith("snap_") && f.endsWith(".csv"))
    .map((f) => ({ t: Number(f.slice(5, -4)), path: join(snapDir, f) }));
  entries.sort((a, b) => a.t - b.t);
  if (entries.length === 0) {
    throw new SchemaError(`${snapDir}: no snapshot files`);
  }
  return entries;
}
