#!/usr/bin/env node
/**
 * report <kind> --in PATH [--in PATH] --out IMG [--delta D]
 *
 * kinds: decay (run.csv [+ fit JSON]), upsilon (upsilon.csv), phase (sweep.json)
 */

import { readFileSync, writeFileSync } from "node:fs";
import { renderDecay, renderPhase, renderUpsilon } from "./charts.js";
import { SchemaError } from "./csv.js";

interface Args {
  kind: string;
  inputs: string[];
  out: string;
  delta?: number;
}

function parseArgs(argv: string[]): Args {
  const [kind, ...rest] = argv;
  if (!kind || kind.startsWith("--")) {
    throw new Error("usage: report <decay|upsilon|phase> --in PATH [--in PATH] --out IMG");
  }
  const inputs: string[] = [];
  let out = "";
  let delta: number | undefined;
  for (let i = 0; i < rest.length; i += 1) {
    const a = rest[i];
    if (a === "--in") inputs.push(rest[++i]);
    else if (a === "--out") out = rest[++i];
    else if (a === "--delta") delta = Number(rest[++i]);
    else throw new Error(`unknown option ${a}`);
  }
  if (inputs.length === 0 || !out) {
    throw new Error("need at least one --in and an --out path");
  }
  return { kind, inputs, out, delta };
}

export function render(args: Args): string {
  const texts = args.inputs.map((p) => readFileSync(p, "utf-8"));
  switch (args.kind) {
    case "decay":
      return renderDecay(texts[0], texts[1]);
    case "upsilon":
      return renderUpsilon(texts[0], args.delta);
    case "phase":
      return renderPhase(texts[0]);
    default:
      throw new Error(`unknown figure kind '${args.kind}'`);
  }
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const svg = render(args);
    writeFileSync(args.out, svg);
    console.log(`wrote ${args.out}`);
    return 0;
  } catch (err) {
    const prefix = err instanceof SchemaError ? "schema error" : "error";
    console.error(`${prefix}: ${(err as Error).message}`);
    return 1;
  }
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
