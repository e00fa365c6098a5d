/** Strict little CSV reader for the simulator's diagnostic tables. */

export class SchemaError extends Error {}

export interface Table {
  columns: string[];
  rows: number[][];
}

/** Parse a headered numeric CSV; non-numeric cells become NaN. */
export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty CSV input");
  const columns = lines[0].split(",").map((c) => c.trim());
  const rows = lines.slice(1).map((line) => line.split(",").map((c) => Number(c)));
  for (const r of rows) {
    if (r.length !== columns.length) {
      throw new SchemaError(
        `CSV row has ${r.length} cells, header has ${columns.length}`
      );
    }
  }
  return { columns, rows };
}

/** Column by name, or a SchemaError naming what is missing. */
export function column(table: Table, name: string): number[] {
  const i = table.columns.indexOf(name);
  if (i < 0) {
    throw new SchemaError(
      `missing column '${name}' (have: ${table.columns.join(", ")})`
    );
  }
  return table.rows.map((r) => r[i]);
}
