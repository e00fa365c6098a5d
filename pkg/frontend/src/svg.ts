/** Deterministic SVG assembly: fixed precision, no timestamps, no randomness. */

export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  body = ""
): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : v}"`)
    .join(" ");
  return body === "" && name !== "text"
    ? `<${name} ${parts}/>`
    : `<${name} ${parts}>${body}</${name}>`;
}

export function line(x1: number, y1: number, x2: number, y2: number, style: string): string {
  return tag("line", { x1, y1, x2, y2, style });
}

export function text(
  x: number,
  y: number,
  body: string,
  opts: { size?: number; anchor?: string; fill?: string; rotate?: number } = {}
): string {
  const attrs: Record<string, string | number> = {
    x,
    y,
    "font-size": opts.size ?? 11,
    "font-family": "Helvetica, Arial, sans-serif",
    "text-anchor": opts.anchor ?? "start",
    fill: opts.fill ?? "#222",
  };
  if (opts.rotate !== undefined) {
    attrs.transform = `rotate(${fmt(opts.rotate)} ${fmt(x)} ${fmt(y)})`;
  }
  return tag("text", attrs, escapeXml(body));
}

export function polyline(points: Array<[number, number]>, style: string): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return tag("polyline", { points: pts, fill: "none", style });
}

export function circle(cx: number, cy: number, r: number, fill: string): string {
  return tag("circle", { cx, cy, r, fill });
}

export function rect(x: number, y: number, w: number, h: number, fill: string): string {
  return tag("rect", { x, y, width: w, height: h, fill });
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function document(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    rect(0, 0, width, height, "#ffffff"),
    ...body,
    "</svg>",
    "",
  ].join("\n");
}
