// Support-reconstruction heatmap with the detection threshold contour and an
// optional true-screen outline overlay.
//
// Usage: plot_support <support.txt> <out.svg> [--outline "x1,y1 x2,y2 ..."]

import { writeFileSync } from "fs";
import { FormatError, parseSupportImage } from "./formats";
import { Svg, colorbar, colormap } from "./svg";

export function parseOutline(spec: string): Array<[number, number]> {
  const pts = spec
    .trim()
    .split(/\s+/)
    .map((pair) => {
      const xy = pair.split(",").map(Number);
      if (xy.length !== 2 || xy.some((v) => !Number.isFinite(v))) {
        throw new FormatError(`bad outline point: ${JSON.stringify(pair)}`);
      }
      return [xy[0], xy[1]] as [number, number];
    });
  if (pts.length < 3) {
    throw new FormatError("outline needs at least three points");
  }
  return pts;
}

export function renderSupport(
  inputPath: string,
  outPath: string,
  outline?: Array<[number, number]>,
): void {
  const img = parseSupportImage(inputPath);
  const plot = 440;
  const pad = 50;
  const svg = new Svg(plot + 2 * pad + 80, plot + 2 * pad);

  const xs = img.s1;
  const ys = img.s2;
  const x0 = xs[0];
  const y0 = ys[0];
  const spanX = xs[xs.length - 1] - x0 || 1;
  const spanY = ys[ys.length - 1] - y0 || 1;
  const span = Math.max(spanX, spanY);
  const scale = plot / span;
  const toPx = (x: number): number => pad + (x - x0) * scale;
  const toPy = (y: number): number => pad + plot - (y - y0) * scale;

  let maxI = 0;
  for (const row of img.intensity) {
    for (const v of row) {
      maxI = Math.max(maxI, v);
    }
  }
  const cellW = (xs.length > 1 ? xs[1] - xs[0] : span) * scale;
  const cellH = (ys.length > 1 ? ys[1] - ys[0] : span) * scale;
  const threshold = img.tau * maxI;
  for (let i = 0; i < img.n1; i++) {
    for (let j = 0; j < img.n2; j++) {
      const v = img.intensity[i][j];
      svg.rect(
        toPx(xs[i]) - cellW / 2,
        toPy(ys[j]) - cellH / 2,
        cellW + 0.4,
        cellH + 0.4,
        colormap(maxI > 0 ? v / maxI : 0),
      );
    }
  }
  // threshold contour: outline the cells at or above tau * max
  if (maxI > 0) {
    for (let i = 0; i < img.n1; i++) {
      for (let j = 0; j < img.n2; j++) {
        if (img.intensity[i][j] >= threshold) {
          const nb = [
            [i - 1, j],
            [i + 1, j],
            [i, j - 1],
            [i, j + 1],
          ].some(
            ([a, b]) =>
              a < 0 ||
              a >= img.n1 ||
              b < 0 ||
              b >= img.n2 ||
              img.intensity[a][b] < threshold,
          );
          if (nb) {
            svg.rect(
              toPx(xs[i]) - cellW / 2,
              toPy(ys[j]) - cellH / 2,
              cellW,
              cellH,
              "none",
              "#ffffff",
              1.2,
            );
          }
        }
      }
    }
  }
  if (outline) {
    const pts = outline.map(([x, y]) => [toPx(x), toPy(y)] as [number, number]);
    pts.push(pts[0]);
    svg.polyline(pts, "#ff3355", 2.2);
  }
  colorbar(svg, plot + pad + 20, pad, 16, plot, "0", maxI.toExponential(2));
  svg.text(
    pad,
    plot + 2 * pad - 14,
    `support reconstruction, tau = ${img.tau}, k = ${img.k}` +
      (outline ? ", true outline overlaid" : ""),
    12,
  );
  writeFileSync(outPath, svg.render());
}

export function main(argv: string[]): number {
  const positional: string[] = [];
  let outlineSpec: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--outline") {
      outlineSpec = argv[++i];
    } else {
      positional.push(argv[i]);
    }
  }
  if (positional.length !== 2) {
    console.error(
      'usage: plot_support <support.txt> <out.svg> [--outline "x1,y1 x2,y2 ..."]',
    );
    return 2;
  }
  try {
    const outline = outlineSpec ? parseOutline(outlineSpec) : undefined;
    renderSupport(positional[0], positional[1], outline);
  } catch (err) {
    if (err instanceof FormatError) {
      console.error(`support-image input invalid: ${err.message}`);
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
