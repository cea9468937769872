// Far-field magnitude over the direction sphere, rendered as two azimuthal
// (Lambert) projections: one disc per hemisphere, points colored by |E_inf|.
//
// Usage: plot_farfield <farfield.txt> <out.svg>

import { writeFileSync } from "fs";
import { FormatError, eMagnitude, parseFarField } from "./formats";
import { Svg, colorbar, colormap } from "./svg";

export function renderFarField(inputPath: string, outPath: string): void {
  const ff = parseFarField(inputPath);
  const mags = ff.records.map(eMagnitude);
  const maxMag = Math.max(...mags, 0);

  const size = 360;
  const pad = 46;
  const svg = new Svg(2 * size + 3 * pad + 70, size + 2 * pad + 20);
  const radius = size / 2 - 6;

  const panels: Array<{ cx: number; cy: number; up: boolean; label: string }> = [
    { cx: pad + size / 2, cy: pad + size / 2 + 10, up: true, label: "upper hemisphere" },
    { cx: 2 * pad + size + size / 2, cy: pad + size / 2 + 10, up: false, label: "lower hemisphere" },
  ];

  for (const p of panels) {
    svg.circle(p.cx, p.cy, radius, "none", "#888");
    svg.text(p.cx, pad - 6, p.label, 13, "middle");
  }

  for (const [i, rec] of ff.records.entries()) {
    const z = rec.dir[2];
    const panel = z >= 0 ? panels[0] : panels[1];
    // Lambert equal-area: r = sqrt((1 - |z|) / 1) scaled into the disc
    const rr = Math.sqrt(Math.max(0, 1 - Math.abs(z)));
    const norm = Math.hypot(rec.dir[0], rec.dir[1]) || 1;
    const px = panel.cx + (radius * rr * rec.dir[0]) / norm;
    const py = panel.cy - (radius * rr * rec.dir[1]) / norm;
    const t = maxMag > 0 ? mags[i] / maxMag : 0;
    svg.circle(px, py, 4.2, colormap(t));
  }

  colorbar(svg, 2 * size + 3 * pad, pad + 10, 16, size - 20, "0", fmtMax(maxMag));
  svg.text(pad, size + 2 * pad + 6,
    `|E_inf| over ${ff.records.length} directions, k = ${ff.k}` +
    (ff.impedanceCheck ? `, impedance check: ${ff.impedanceCheck}` : ""), 12);
  writeFileSync(outPath, svg.render());
}

function fmtMax(v: number): string {
  return v === 0 ? "0" : v.toExponential(2);
}

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: plot_farfield <farfield.txt> <out.svg>");
    return 2;
  }
  try {
    renderFarField(argv[0], argv[1]);
  } catch (err) {
    if (err instanceof FormatError) {
      console.error(`far-field file invalid: ${err.message}`);
      return 1;
    }
    console.error(String(err));
    return 1;
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
