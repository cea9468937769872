// Minimal deterministic SVG assembly: no timestamps, no randomness, so
// reruns produce byte-identical figures.

export class Svg {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  rect(
    x: number,
    y: number,
    w: number,
    h: number,
    fill: string,
    stroke = "none",
    strokeWidth = 0,
  ): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}"` +
        ` fill="${fill}" stroke="${stroke}" stroke-width="${fmt(strokeWidth)}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string, stroke = "none"): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1): void {
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}"` +
        ` stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5): void {
    const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${fmt(width)}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 12, anchor = "start"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}"` +
        ` font-family="Helvetica, sans-serif" text-anchor="${anchor}">${escapeXml(content)}</text>`,
    );
  }

  marker(cx: number, cy: number, size: number, stroke: string): void {
    this.line(cx - size, cy, cx + size, cy, stroke, 2);
    this.line(cx, cy - size, cx, cy + size, stroke, 2);
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}"` +
      ` height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<rect width="100%" height="100%" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(3);
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

// Compact viridis-like colormap: piecewise-linear through sampled anchors.
const ANCHORS: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colormap(t: number): string {
  const x = Math.min(Math.max(t, 0), 1) * (ANCHORS.length - 1);
  const i = Math.min(Math.floor(x), ANCHORS.length - 2);
  const f = x - i;
  const c = ANCHORS[i].map((a, j) =>
    Math.round(a + f * (ANCHORS[i + 1][j] - a)),
  );
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

export function colorbar(
  svg: Svg,
  x: number,
  y: number,
  w: number,
  h: number,
  lo: string,
  hi: string,
): void {
  const steps = 32;
  for (let i = 0; i < steps; i++) {
    svg.rect(x, y + h - ((i + 1) * h) / steps, w, h / steps + 0.5, colormap(i / (steps - 1)));
  }
  svg.text(x + w + 4, y + h, lo, 10);
  svg.text(x + w + 4, y + 10, hi, 10);
}
