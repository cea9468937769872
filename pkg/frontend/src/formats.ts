// Parsers for the solver's text outputs: far-field samples, support images,
// plane estimates and fit landscapes.  Each parser throws FormatError with
// the offending line when a file does not match its documented layout.

import { readFileSync } from "fs";

export class FormatError extends Error {}

export interface Complex3 {
  re: [number, number, number];
  im: [number, number, number];
}

export interface FarFieldRecord {
  dir: [number, number, number];
  eInf: Complex3;
  hInf: Complex3;
}

export interface FarFieldFile {
  k: number;
  eps: number;
  mu: number;
  grid?: { kind: string; nTheta: number; nPhi: number; thetaMax: number };
  frame?: { normal: [number, number, number]; offset: number };
  impedanceCheck?: string;
  records: FarFieldRecord[];
}

function splitLines(text: string): string[] {
  return text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
}

function num(tok: string, where: string): number {
  const v = Number(tok);
  if (!Number.isFinite(v)) {
    throw new FormatError(`${where}: not a number: ${JSON.stringify(tok)}`);
  }
  return v;
}

export function parseFarField(path: string): FarFieldFile {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines.length === 0 || lines[0] !== "farfield 1") {
    throw new FormatError(
      `bad far-field header: ${JSON.stringify(lines[0] ?? "<empty>")}`,
    );
  }
  const out: Partial<FarFieldFile> = {};
  let i = 1;
  let n = -1;
  for (; i < lines.length; i++) {
    const parts = lines[i].split(/\s+/);
    const key = parts[0];
    if (key === "k" || key === "eps" || key === "mu") {
      (out as Record<string, unknown>)[key] = num(parts[1], `header ${key}`);
    } else if (key === "grid") {
      out.grid = {
        kind: parts[1],
        nTheta: num(parts[2], "grid"),
        nPhi: num(parts[3], "grid"),
        thetaMax: num(parts[4], "grid"),
      };
    } else if (key === "frame") {
      out.frame = {
        normal: [
          num(parts[1], "frame"),
          num(parts[2], "frame"),
          num(parts[3], "frame"),
        ],
        offset: num(parts[4], "frame"),
      };
    } else if (key === "impedance_check") {
      out.impedanceCheck = parts[1];
    } else if (key === "n") {
      n = num(parts[1], "record count");
      i += 1;
      break;
    } else {
      throw new FormatError(`unrecognized far-field header line: ${lines[i]}`);
    }
  }
  if (out.k === undefined || out.eps === undefined || out.mu === undefined) {
    throw new FormatError("far-field header is missing k, eps or mu");
  }
  if (n < 0) {
    throw new FormatError("far-field header is missing the record count");
  }
  const records: FarFieldRecord[] = [];
  const body = lines.slice(i);
  if (body.length !== n) {
    throw new FormatError(
      `expected ${n} far-field records, found ${body.length}`,
    );
  }
  for (const [j, line] of body.entries()) {
    const v = line.split(/\s+/).map((t) => num(t, `record ${j}`));
    if (v.length !== 15) {
      throw new FormatError(`record ${j} has ${v.length} fields, expected 15`);
    }
    records.push({
      dir: [v[0], v[1], v[2]],
      eInf: { re: [v[3], v[5], v[7]], im: [v[4], v[6], v[8]] },
      hInf: { re: [v[9], v[11], v[13]], im: [v[10], v[12], v[14]] },
    });
  }
  return { ...(out as FarFieldFile), records };
}

export function eMagnitude(rec: FarFieldRecord): number {
  let s = 0;
  for (let c = 0; c < 3; c++) {
    s += rec.eInf.re[c] ** 2 + rec.eInf.im[c] ** 2;
  }
  return Math.sqrt(s);
}

export interface SupportImageFile {
  frame: { normal: [number, number, number]; offset: number };
  k: number;
  tau: number;
  n1: number;
  n2: number;
  s1: number[];
  s2: number[];
  intensity: number[][]; // [n1][n2]
}

export function parseSupportImage(path: string): SupportImageFile {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines.length === 0 || lines[0] !== "supportimage 1") {
    throw new FormatError(
      `bad support-image header: ${JSON.stringify(lines[0] ?? "<empty>")}`,
    );
  }
  let frame: SupportImageFile["frame"] | undefined;
  let k: number | undefined;
  let tau: number | undefined;
  let grid: number[] | undefined;
  let n = -1;
  let i = 1;
  for (; i < lines.length; i++) {
    const parts = lines[i].split(/\s+/);
    if (parts[0] === "frame") {
      frame = {
        normal: [
          num(parts[1], "frame"),
          num(parts[2], "frame"),
          num(parts[3], "frame"),
        ],
        offset: num(parts[4], "frame"),
      };
    } else if (parts[0] === "k") {
      k = num(parts[1], "k");
    } else if (parts[0] === "tau") {
      tau = num(parts[1], "tau");
    } else if (parts[0] === "grid") {
      grid = parts.slice(1).map((t) => num(t, "grid"));
      if (grid.length !== 6) {
        throw new FormatError(`grid line needs 6 fields: ${lines[i]}`);
      }
    } else if (parts[0] === "n") {
      n = num(parts[1], "n");
      i += 1;
      break;
    } else {
      throw new FormatError(`unrecognized support-image line: ${lines[i]}`);
    }
  }
  if (!frame || k === undefined || tau === undefined || !grid || n < 0) {
    throw new FormatError("support-image header incomplete");
  }
  const [n1, n2, x0, y0, dx, dy] = grid;
  const body = lines.slice(i);
  if (body.length !== n || n !== n1 * n2) {
    throw new FormatError(
      `support-image record count mismatch: header ${n}, found ${body.length}`,
    );
  }
  const intensity: number[][] = Array.from({ length: n1 }, () =>
    new Array<number>(n2).fill(0),
  );
  for (const [j, line] of body.entries()) {
    const v = line.split(/\s+/).map((t) => num(t, `record ${j}`));
    if (v.length !== 3) {
      throw new FormatError(`support record ${j} malformed: ${line}`);
    }
    intensity[Math.floor(j / n2)][j % n2] = v[2];
  }
  const s1 = Array.from({ length: n1 }, (_, a) => x0 + dx * a);
  const s2 = Array.from({ length: n2 }, (_, b) => y0 + dy * b);
  return { frame, k, tau, n1, n2, s1, s2, intensity };
}

export interface PlaneEstimateFile {
  normal: [number, number, number];
  offset: number;
  objective: number;
  iterations: number;
}

export function parsePlaneEstimate(path: string): PlaneEstimateFile {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines.length === 0 || lines[0] !== "planeestimate 1") {
    throw new FormatError("bad plane-estimate header");
  }
  const kv = new Map<string, string[]>();
  for (const line of lines.slice(1)) {
    const parts = line.split(/\s+/);
    kv.set(parts[0], parts.slice(1));
  }
  const normal = kv.get("normal");
  const offset = kv.get("offset");
  const objective = kv.get("objective");
  const iterations = kv.get("iterations");
  if (!normal || normal.length !== 3 || !offset || !objective || !iterations) {
    throw new FormatError("plane-estimate file incomplete");
  }
  return {
    normal: [
      num(normal[0], "normal"),
      num(normal[1], "normal"),
      num(normal[2], "normal"),
    ],
    offset: num(offset[0], "offset"),
    objective: num(objective[0], "objective"),
    iterations: num(iterations[0], "iterations"),
  };
}

export interface LandscapeRow {
  thetaDeg: number;
  phiDeg: number;
  offset: number;
  objective: number;
}

export function parseLandscape(path: string): LandscapeRow[] {
  const lines = splitLines(readFileSync(path, "utf8"));
  if (lines.length === 0 || lines[0] !== "planefitlandscape 1") {
    throw new FormatError("bad plane-landscape header");
  }
  if (lines.length < 2 || !lines[1].startsWith("n ")) {
    throw new FormatError("plane-landscape missing count");
  }
  const n = num(lines[1].split(/\s+/)[1], "count");
  const body = lines.slice(2);
  if (body.length !== n) {
    throw new FormatError(
      `plane-landscape record mismatch: header ${n}, found ${body.length}`,
    );
  }
  if (n === 0) {
    throw new FormatError("plane-landscape is empty");
  }
  return body.map((line, j) => {
    const v = line.split(/\s+/).map((t) => num(t, `row ${j}`));
    if (v.length !== 4) {
      throw new FormatError(`landscape row ${j} malformed: ${line}`);
    }
    return { thetaDeg: v[0], phiDeg: v[1], offset: v[2], objective: v[3] };
  });
}
