/** Linear and log10 axis scales with pleasant tick positions. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
  ticks(): number[];
  log: boolean;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  f.log = false;
  f.ticks = () => {
    const step = niceStep(span / 5);
    const t: number[] = [];
    for (let v = Math.ceil(d0 / step) * step; v <= d1 + 1e-12; v += step) {
      t.push(Math.abs(v) < step * 1e-9 ? 0 : v);
    }
    return t;
  };
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) throw new Error("log scale needs positive bounds");
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const span = l1 - l0 || 1;
  const [r0, r1] = range;
  const f = ((v: number) => r0 + ((Math.log10(v) - l0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  f.log = true;
  f.ticks = () => {
    const t: number[] = [];
    for (let e = Math.ceil(l0 - 1e-9); e <= l1 + 1e-9; e += 1) {
      t.push(Math.pow(10, e));
    }
    if (t.length < 2) {
      // under one decade: fall back to 1-2-5 positions
      for (const m of [1, 2, 5]) {
        for (let e = Math.floor(l0) - 1; e <= Math.ceil(l1) + 1; e += 1) {
          const v = m * Math.pow(10, e);
          if (v >= d0 * 0.999 && v <= d1 * 1.001) t.push(v);
        }
      }
      t.sort((a, b) => a - b);
    }
    return t;
  };
  return f;
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(Math.abs(raw) || 1)));
  const m = raw / mag;
  const step = m >= 5 ? 10 : m >= 2 ? 5 : m >= 1 ? 2 : 1;
  return step * mag;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const e = Math.floor(Math.log10(a));
    const m = v / Math.pow(10, e);
    const mm = Math.round(m * 100) / 100;
    return `${mm}e${e}`;
  }
  return String(Math.round(v * 1e6) / 1e6);
}
