/**
 * The three report figures:
 *
 *   decay   — sup|u| against the dispersive clock on log-log axes, with the
 *             reference -3/2 slope and, when a fit report is supplied, the
 *             fitted power law;
 *   upsilon — the blowup functional against its closed-form comparison
 *             trajectory, with the comparison blowup time marked;
 *   phase   — classified (nu, delta) outcomes with the critical line
 *             nu = -1/2.
 *
 * All rendering is a pure function of the input file contents, so repeated
 * invocations produce byte-identical SVG.
 */

import { column, parseCsv, SchemaError } from "./csv.js";
import { linearScale, logScale, Scale, tickLabel } from "./scale.js";
import { circle, document as svgDoc, fmt, line, polyline, rect, text } from "./svg.js";

const W = 640;
const H = 440;
const MARGIN = { left: 72, right: 24, top: 40, bottom: 56 };

const COLORS = {
  series: "#2457a7",
  secondary: "#c23b22",
  reference: "#2d6a4f",
  grid: "#dddddd",
  axis: "#444444",
  blowup: "#c23b22",
  decay: "#2457a7",
  undecided: "#999999",
};

interface FrameOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  xs: Scale;
  ys: Scale;
}

function frame(o: FrameOpts): string[] {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = W - MARGIN.right;
  const y0 = H - MARGIN.bottom;
  const y1 = MARGIN.top;
  for (const tx of o.xs.ticks()) {
    const px = o.xs(tx);
    parts.push(line(px, y0, px, y1, `stroke:${COLORS.grid};stroke-width:0.6`));
    parts.push(text(px, y0 + 16, tickLabel(tx), { anchor: "middle" }));
  }
  for (const ty of o.ys.ticks()) {
    const py = o.ys(ty);
    parts.push(line(x0, py, x1, py, `stroke:${COLORS.grid};stroke-width:0.6`));
    parts.push(text(x0 - 6, py + 4, tickLabel(ty), { anchor: "end" }));
  }
  parts.push(line(x0, y0, x1, y0, `stroke:${COLORS.axis};stroke-width:1`));
  parts.push(line(x0, y0, x0, y1, `stroke:${COLORS.axis};stroke-width:1`));
  parts.push(text((x0 + x1) / 2, H - 16, o.xLabel, { anchor: "middle", size: 12 }));
  parts.push(text(18, (y0 + y1) / 2, o.yLabel, { anchor: "middle", size: 12, rotate: -90 }));
  parts.push(text((x0 + x1) / 2, 22, o.title, { anchor: "middle", size: 14 }));
  return parts;
}

function plotArea(): { x: [number, number]; y: [number, number] } {
  return {
    x: [MARGIN.left, W - MARGIN.right],
    y: [H - MARGIN.bottom, MARGIN.top],
  };
}

interface FitReport {
  exponent: number;
  amplitude: number;
  window?: [number, number];
}

/** Decay figure from a run.csv (columns t, sup_u) plus an optional fit JSON. */
export function renderDecay(runCsv: string, fitJson?: string): string {
  const table = parseCsv(runCsv);
  const t = column(table, "t");
  const sup = column(table, "sup_u");
  const pts = t
    .map((ti, i) => [ti, sup[i]] as [number, number])
    .filter(([ti, si]) => ti > 0 && si > 0);
  if (pts.length < 2) throw new SchemaError("decay plot needs >= 2 positive samples");

  let fit: FitReport | null = null;
  if (fitJson !== undefined) {
    const doc = JSON.parse(fitJson);
    if (typeof doc.exponent !== "number" || typeof doc.amplitude !== "number") {
      throw new SchemaError("fit report needs numeric 'exponent' and 'amplitude'");
    }
    fit = doc as FitReport;
  }

  const tMin = Math.min(...pts.map((p) => p[0]));
  const tMax = Math.max(...pts.map((p) => p[0]));
  const vMin = Math.min(...pts.map((p) => p[1]));
  const vMax = Math.max(...pts.map((p) => p[1]));
  const area = plotArea();
  const xs = logScale([tMin, tMax], area.x);
  const ys = logScale([vMin / 1.5, vMax * 1.5], area.y);

  const parts = frame({
    title: "sup|u| decay",
    xLabel: "dispersive clock",
    yLabel: "sup|u|",
    xs,
    ys,
  });
  parts.push(polyline(pts.map(([a, b]) => [xs(a), ys(b)]),
    `stroke:${COLORS.series};stroke-width:1.6`));

  // reference slope -3/2 anchored at the first sample
  const [ta, va] = pts[0];
  const refEnd = va * Math.pow(tMax / ta, -1.5);
  parts.push(line(xs(ta), ys(va), xs(tMax), ys(refEnd),
    `stroke:${COLORS.reference};stroke-width:1.2;stroke-dasharray:6,4`));
  parts.push(text(xs(tMax) - 4, ys(refEnd) - 6, "slope -3/2",
    { anchor: "end", fill: COLORS.reference }));

  if (fit) {
    const f = (z: number) => fit!.amplitude * Math.pow(z, fit!.exponent);
    const lo = fit.window ? Math.max(fit.window[0], tMin) : tMin;
    const hi = fit.window ? Math.min(fit.window[1], tMax) : tMax;
    parts.push(line(xs(lo), ys(f(lo)), xs(hi), ys(f(hi)),
      `stroke:${COLORS.secondary};stroke-width:1.4;stroke-dasharray:2,3`));
    parts.push(text(MARGIN.left + 8, MARGIN.top + 14,
      `fitted slope ${fmt(fit.exponent)}`, { fill: COLORS.secondary }));
  }
  return svgDoc(W, H, parts);
}

/** Blowup-functional figure from upsilon.csv; delta (if given) marks t*. */
export function renderUpsilon(upsCsv: string, delta?: number): string {
  const table = parseCsv(upsCsv);
  const t = column(table, "t");
  const ups = column(table, "upsilon");
  const ric = column(table, "riccati_y");
  const pts = t.map((ti, i) => [ti, ups[i]] as [number, number])
    .filter(([, u]) => Number.isFinite(u) && u > 0);
  if (pts.length < 2) throw new SchemaError("upsilon plot needs >= 2 positive samples");
  const ricPts = t.map((ti, i) => [ti, ric[i]] as [number, number])
    .filter(([, y]) => Number.isFinite(y) && y > 0);

  let tStar: number | null = null;
  if (delta !== undefined && ricPts.length > 0) {
    const inv = Math.pow(delta, -2) - 2 / ricPts[0][1];
    if (inv > 0) tStar = t[0] + Math.pow(inv, -0.5) - delta;
  }

  const allV = pts.map((p) => p[1]).concat(ricPts.map((p) => p[1]));
  const area = plotArea();
  const tHi = Math.max(t[t.length - 1], tStar === null ? -Infinity : tStar * 1.08);
  const xs = linearScale([t[0], tHi], area.x);
  const ys = logScale([Math.min(...allV) / 1.5, Math.max(...allV) * 1.5], area.y);

  const parts = frame({
    title: "blowup functional vs comparison solution",
    xLabel: "t",
    yLabel: "value",
    xs,
    ys,
  });
  if (ricPts.length >= 2) {
    parts.push(polyline(ricPts.map(([a, b]) => [xs(a), ys(b)]),
      `stroke:${COLORS.secondary};stroke-width:1.3;stroke-dasharray:5,3`));
    parts.push(text(MARGIN.left + 8, MARGIN.top + 28, "comparison lower bound",
      { fill: COLORS.secondary }));
  }
  parts.push(polyline(pts.map(([a, b]) => [xs(a), ys(b)]),
    `stroke:${COLORS.series};stroke-width:1.8`));
  parts.push(text(MARGIN.left + 8, MARGIN.top + 14, "measured", { fill: COLORS.series }));

  if (tStar !== null && tStar >= xs.domain[0] && tStar <= xs.domain[1]) {
    parts.push(line(xs(tStar), area.y[0], xs(tStar), area.y[1],
      `stroke:${COLORS.reference};stroke-width:1.2;stroke-dasharray:3,3`));
    parts.push(text(xs(tStar) + 4, MARGIN.top + 14, "t*",
      { fill: COLORS.reference }));
  }
  return svgDoc(W, H, parts);
}

interface SweepOutcome {
  nu: number;
  delta: number;
  class: string;
}

/** Phase diagram from sweep.json; renders axes even with no outcomes. */
export function renderPhase(sweepJson: string): string {
  const doc = JSON.parse(sweepJson);
  if (!Array.isArray(doc.outcomes)) {
    throw new SchemaError("sweep report needs an 'outcomes' array");
  }
  const outcomes: SweepOutcome[] = doc.outcomes.map((o: any) => {
    if (typeof o.nu !== "number" || typeof o.delta !== "number" || !o.class) {
      throw new SchemaError("each outcome needs 'nu', 'delta' and 'class'");
    }
    return { nu: o.nu, delta: o.delta, class: String(o.class) };
  });

  const nus = outcomes.map((o) => o.nu);
  const deltas = outcomes.map((o) => o.delta);
  const nuLo = nus.length ? Math.min(...nus, -0.5) - 0.1 : -1.1;
  const nuHi = nus.length ? Math.max(...nus, -0.5) + 0.1 : 0.1;
  const dLo = deltas.length ? Math.min(...deltas) - 0.05 : 0.0;
  const dHi = deltas.length ? Math.max(...deltas) + 0.05 : 0.5;
  const area = plotArea();
  const xs = linearScale([nuLo, nuHi], area.x);
  const ys = linearScale([dLo, dHi], area.y);

  const parts = frame({
    title: "outcome phase diagram",
    xLabel: "amplitude power nu",
    yLabel: "pulse width delta",
    xs,
    ys,
  });

  // critical line
  parts.push(line(xs(-0.5), area.y[0], xs(-0.5), area.y[1],
    `stroke:${COLORS.reference};stroke-width:1.4;stroke-dasharray:6,3`));
  parts.push(text(xs(-0.5) + 4, MARGIN.top + 14, "nu = -1/2",
    { fill: COLORS.reference }));

  for (const o of outcomes) {
    const color = o.class === "blowup" ? COLORS.blowup
      : o.class === "decay" ? COLORS.decay : COLORS.undecided;
    parts.push(circle(xs(o.nu), ys(o.delta), 6, color));
  }
  // legend
  const legend: Array<[string, string]> = [
    ["blowup", COLORS.blowup],
    ["decay", COLORS.decay],
    ["undecided", COLORS.undecided],
  ];
  legend.forEach(([label, color], i) => {
    const lx = W - MARGIN.right - 110;
    const ly = MARGIN.top + 14 + 16 * i;
    parts.push(rect(lx, ly - 8, 10, 10, color));
    parts.push(text(lx + 16, ly, label));
  });
  return svgDoc(W, H, parts);
}
