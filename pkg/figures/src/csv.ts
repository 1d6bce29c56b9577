import { readFileSync } from "node:fs";
import Papa from "papaparse";

export type Row = Record<string, number>;

export interface Table {
  columns: string[];
  rows: Row[];
}

/* Trace floats are written as .17g with "nan"/"inf"/"-inf" specials. */
function parseCell(cell: string | undefined): number {
  if (cell === undefined || cell === "") return NaN;
  if (cell === "nan") return NaN;
  if (cell === "inf") return Infinity;
  if (cell === "-inf") return -Infinity;
  return Number(cell);
}

export function readCsv(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch (e) {
    throw new Error(`cannot read ${path}: ${(e as Error).message}`);
  }
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const err = parsed.errors[0];
    throw new Error(`${path}: malformed CSV (${err.message})`);
  }
  const columns = parsed.meta.fields ?? [];
  const rows = parsed.data.map((raw) => {
    const row: Row = {};
    for (const col of columns) row[col] = parseCell(raw[col]);
    return row;
  });
  return { columns, rows };
}

export function requireColumns(path: string, table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new Error(`${path}: missing column "${col}"`);
    }
  }
}
