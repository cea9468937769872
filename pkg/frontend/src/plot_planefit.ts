// Plane-fit objective landscape over candidate normals (polar layout:
// radius = polar angle, azimuth = azimuth), log-scaled color, with the
// recovered optimum marked and annotated.
//
// Usage: plot_planefit <planefit.txt> <landscape.txt> <out.svg>

import { writeFileSync } from "fs";
import {
  FormatError,
  parseLandscape,
  parsePlaneEstimate,
} from "./formats";
import { Svg, colorbar, colormap } from "./svg";

export function renderPlaneFit(
  estimatePath: string,
  landscapePath: string,
  outPath: string,
): void {
  const est = parsePlaneEstimate(estimatePath);
  const rows = parseLandscape(landscapePath);

  const size = 460;
  const pad = 50;
  const svg = new Svg(size + 2 * pad + 90, size + 2 * pad + 30);
  const cx = pad + size / 2;
  const cy = pad + size / 2;
  const radius = size / 2;

  const logs = rows.map((r) => Math.log10(Math.max(r.objective, 1e-16)));
  const lo = Math.min(...logs);
  const hi = Math.max(...logs);
  const spread = hi - lo || 1;

  for (const [i, r] of rows.entries()) {
    const rr = (radius * r.thetaDeg) / 90;
    const a = (r.phiDeg * Math.PI) / 180;
    const px = cx + rr * Math.cos(a);
    const py = cy - rr * Math.sin(a);
    // low objective = good fit = bright
    svg.circle(px, py, 7, colormap(1 - (logs[i] - lo) / spread));
  }
  for (const ring of [30, 60, 90]) {
    svg.circle(cx, cy, (radius * ring) / 90, "none", "#bbb");
    svg.text(cx + (radius * ring) / 90 + 2, cy - 3, `${ring}`, 9);
  }

  const thetaEst =
    (Math.acos(Math.min(Math.max(est.normal[2], -1), 1)) * 180) / Math.PI;
  const phiEst = (Math.atan2(est.normal[1], est.normal[0]) * 180) / Math.PI;
  const rr = (radius * thetaEst) / 90;
  const a = (phiEst * Math.PI) / 180;
  svg.marker(cx + rr * Math.cos(a), cy - rr * Math.sin(a), 9, "#ff3355");

  colorbar(svg, size + pad + 24, pad, 16, size, `1e${hi.toFixed(1)}`, `1e${lo.toFixed(1)}`);
  svg.text(
    pad,
    size + 2 * pad + 8,
    `plane fit: normal (${est.normal.map((v) => v.toFixed(4)).join(", ")}), ` +
      `offset ${est.offset.toFixed(4)}, objective ${est.objective.toExponential(2)}, ` +
      `${est.iterations} evaluations`,
    12,
  );
  writeFileSync(outPath, svg.render());
}

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    console.error(
      "usage: plot_planefit <planefit.txt> <landscape.txt> <out.svg>",
    );
    return 2;
  }
  try {
    renderPlaneFit(argv[0], argv[1], argv[2]);
  } catch (err) {
    if (err instanceof FormatError) {
      console.error(`plane-fit input invalid: ${err.message}`);
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
