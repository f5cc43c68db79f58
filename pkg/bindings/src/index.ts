/**
 * Node bindings for the pointkit toolkit.
 *
 * Array-in/array-out wrappers around the installed `pointkit` command line
 * tools (plus the package's Python API for the few operations the CLI does
 * not expose). Nothing numeric is reimplemented here: every value comes out
 * of the primary implementation, so results are bit-identical to what the
 * CLI prints. Doubles cross the boundary as JSON or shortest round-trip
 * decimal text, both of which are lossless for IEEE-754.
 *
 * Set POINTKIT_BIN / POINTKIT_PYTHON to override the executables used.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

/** Row-major matrix crossing the boundary (N x 3 points, 8 x 3 corners). */
export type Matrix = number[][];

export interface Neighborhood {
  centroid_index: number;
  member_indices: number[];
}

export interface SingleViewResult {
  kept_indices: number[];
  points: Matrix;
}

export interface JitterOptions {
  sigma?: number;
  seed?: number;
}

export interface RotateOptions {
  theta?: number;
  seed?: number;
}

export interface SingleViewOptions {
  fov?: number;
  bins?: number;
  distance?: number;
  seed?: number;
}

/**
 * Failure reported by the primary implementation. `name` carries the
 * original error class name (ParseError, InvalidBox, InvalidCount, ...),
 * parsed from the standard `pointkit: error: <Name>: <detail>` stderr line.
 */
export class PointkitError extends Error {
  readonly exitCode: number;

  constructor(name: string, message: string, exitCode: number) {
    super(message);
    this.name = name;
    this.exitCode = exitCode;
  }

  static fromStderr(stderr: string, exitCode: number): PointkitError {
    const m = /^pointkit: error: ([A-Za-z_][A-Za-z0-9_]*): ([\s\S]*)$/m.exec(stderr);
    if (m) {
      return new PointkitError(m[1]!, m[2]!.trim(), exitCode);
    }
    return new PointkitError("PointkitError", stderr.trim(), exitCode);
  }
}

const CLI = () => process.env.POINTKIT_BIN ?? "pointkit";
const PYTHON = () => process.env.POINTKIT_PYTHON ?? "python3";

function run(cmd: string, args: string[]): string {
  const p = spawnSync(cmd, args, { encoding: "utf8", maxBuffer: 1 << 28 });
  if (p.error) {
    throw p.error;
  }
  if (p.status !== 0) {
    throw PointkitError.fromStderr(p.stderr ?? "", p.status ?? -1);
  }
  return p.stdout;
}

function runCliJson(args: string[]): unknown {
  return JSON.parse(run(CLI(), args));
}

/**
 * Python drivers mirror the CLI error contract so every failure surfaces
 * through PointkitError.fromStderr the same way.
 */
const DRIVER_PREAMBLE = `
import json, sys
import numpy as np
import pointkit
from pointkit import PointkitError
def _main():
`;
const DRIVER_EPILOGUE = `
try:
    _main()
except PointkitError as exc:
    print(f"pointkit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    raise SystemExit(1)
`;

function runDriverJson(body: string, args: string[]): unknown {
  const code = DRIVER_PREAMBLE + body + DRIVER_EPILOGUE;
  return JSON.parse(run(PYTHON(), ["-c", code, ...args]));
}

function checkMatrix(name: string, value: unknown, cols: number, rows?: number): Matrix {
  if (!Array.isArray(value) || value.length === 0) {
    throw new TypeError(`${name} must be a non-empty array of rows`);
  }
  if (rows !== undefined && value.length !== rows) {
    throw new TypeError(`${name} must have exactly ${rows} rows, got ${value.length}`);
  }
  for (const row of value) {
    if (!Array.isArray(row) || row.length !== cols) {
      throw new TypeError(`${name} rows must have exactly ${cols} entries`);
    }
    for (const v of row) {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new TypeError(`${name} entries must be finite numbers`);
      }
    }
  }
  return value as Matrix;
}

function checkInt(name: string, value: number): number {
  if (!Number.isInteger(value)) {
    throw new TypeError(`${name} must be an integer, got ${value}`);
  }
  return value;
}

function checkFinite(name: string, value: number): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new TypeError(`${name} must be a finite number`);
  }
  return value;
}

/**
 * Exact plain-decimal rendering of a double. String(x) is already the
 * shortest round-trip form; the expansion below only kicks in when that
 * form uses an exponent, which the box grammar does not allow. It spells
 * out the exact binary value (mantissa * 5^k shifted k places), so the
 * reader recovers the identical double.
 */
function plainDecimal(x: number): string {
  const s = String(checkFinite("coordinate", x));
  if (!/[eE]/.test(s)) {
    return s;
  }
  const view = new DataView(new ArrayBuffer(8));
  view.setFloat64(0, x);
  const bits = view.getBigUint64(0);
  const sign = bits >> 63n ? "-" : "";
  const expBits = Number((bits >> 52n) & 0x7ffn);
  const frac = bits & 0xfffffffffffffn;
  const mantissa = expBits === 0 ? frac : frac | (1n << 52n);
  if (mantissa === 0n) {
    return "0";
  }
  const exp2 = (expBits === 0 ? 1 : expBits) - 1075;
  if (exp2 >= 0) {
    return sign + (mantissa << BigInt(exp2)).toString();
  }
  const k = -exp2;
  const digits = (mantissa * 5n ** BigInt(k)).toString().padStart(k + 1, "0");
  const cut = digits.length - k;
  const fracDigits = digits.slice(cut).replace(/0+$/, "");
  return sign + digits.slice(0, cut) + (fracDigits ? "." + fracDigits : "");
}

function boxString(corners: Matrix): string {
  const rows = corners.map(
    (r) => `[${plainDecimal(r[0]!)}, ${plainDecimal(r[1]!)}, ${plainDecimal(r[2]!)}]`,
  );
  return `[${rows.join(", ")}]`;
}

function writeCloudFile(dir: string, name: string, points: Matrix): string {
  const file = path.join(dir, name);
  const body = points.map((r) => r.map(String).join(" ")).join("\n") + "\n";
  fs.writeFileSync(file, body);
  return file;
}

function inTempDir<T>(fn: (dir: string) => T): T {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "pointkit-"));
  try {
    return fn(dir);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

interface TokenizePayload {
  seed_indices: number[];
  neighborhoods: Neighborhood[];
}

function tokenize(points: Matrix, nSeeds: number, k: number, startIndex: number): TokenizePayload {
  checkMatrix("points", points, 3);
  checkInt("nSeeds", nSeeds);
  checkInt("k", k);
  checkInt("startIndex", startIndex);
  return inTempDir((dir) => {
    const cloud = writeCloudFile(dir, "cloud.txt", points);
    return runCliJson([
      "tokenize", cloud,
      "--n-seeds", String(nSeeds),
      "--k", String(k),
      "--start-index", String(startIndex),
    ]) as TokenizePayload;
  });
}

/** Farthest point sampling order; ties go to the lowest index. */
export function fps(points: Matrix, nSeeds: number, startIndex = 0): number[] {
  return tokenize(points, nSeeds, 1, startIndex).seed_indices;
}

/** FPS seeds plus each seed's k nearest points, centroid listed first. */
export function knn_group(
  points: Matrix,
  nSeeds: number,
  k: number,
  startIndex = 0,
): Neighborhood[] {
  return tokenize(points, nSeeds, k, startIndex).neighborhoods;
}

/** Symmetric Chamfer distance between two point sets. */
export function chamfer(a: Matrix, b: Matrix): number {
  checkMatrix("a", a, 3);
  checkMatrix("b", b, 3);
  return inTempDir((dir) => {
    const fa = writeCloudFile(dir, "a.txt", a);
    const fb = writeCloudFile(dir, "b.txt", b);
    const body = `
    a = pointkit.read_cloud(sys.argv[1])
    b = pointkit.read_cloud(sys.argv[2])
    print(json.dumps(pointkit.chamfer(a, b)))
`;
    return runDriverJson(body, [fa, fb]) as number;
  });
}

/** Oriented-box intersection over union from two 8 x 3 corner arrays. */
export function iou(cornersA: Matrix, cornersB: Matrix): number {
  const a = boxString(checkMatrix("cornersA", cornersA, 3, 8));
  const b = boxString(checkMatrix("cornersB", cornersB, 3, 8));
  const values = runCliJson(["iou", a, b]) as number[];
  return values[0]!;
}

/** Parse one box line into its 8 x 3 corner array. */
export function parse_box(text: string): Matrix {
  if (typeof text !== "string") {
    throw new TypeError("text must be a string");
  }
  const body = `
    print(json.dumps(pointkit.parse_box(sys.argv[1]).corners.tolist()))
`;
  return runDriverJson(body, [text]) as Matrix;
}

/** Canonical one-line serialization of an 8 x 3 corner array. */
export function format_box(corners: Matrix): string {
  checkMatrix("corners", corners, 3, 8);
  const body = `
    corners = np.asarray(json.loads(sys.argv[1]), dtype=np.float64)
    box = pointkit.OrientedBox.from_corners(corners)
    print(json.dumps(pointkit.format_box(box)))
`;
  return runDriverJson(body, [JSON.stringify(corners)]) as string;
}

function corrupt(points: Matrix, flags: string[]): unknown {
  checkMatrix("points", points, 3);
  return inTempDir((dir) => {
    const cloud = writeCloudFile(dir, "cloud.txt", points);
    return runCliJson(["corrupt", cloud, ...flags]);
  });
}

/** Additive Gaussian noise, seeded. */
export function jitter(points: Matrix, options: JitterOptions = {}): Matrix {
  const flags = ["--kind", "jitter"];
  if (options.sigma !== undefined) {
    flags.push("--sigma", String(checkFinite("sigma", options.sigma)));
  }
  if (options.seed !== undefined) {
    flags.push("--seed", String(checkInt("seed", options.seed)));
  }
  return (corrupt(points, flags) as { points: Matrix }).points;
}

/** Random rotation with Euler angles bounded by theta, seeded. */
export function rotate(points: Matrix, options: RotateOptions = {}): Matrix {
  const flags = ["--kind", "rotate"];
  if (options.theta !== undefined) {
    flags.push("--theta", String(checkFinite("theta", options.theta)));
  }
  if (options.seed !== undefined) {
    flags.push("--seed", String(checkInt("seed", options.seed)));
  }
  return (corrupt(points, flags) as { points: Matrix }).points;
}

/** Depth-buffer crop from a random camera direction, seeded. */
export function single_view(
  points: Matrix,
  options: SingleViewOptions = {},
): SingleViewResult {
  const flags = ["--kind", "single_view"];
  if (options.fov !== undefined) {
    flags.push("--fov", String(checkFinite("fov", options.fov)));
  }
  if (options.bins !== undefined) {
    flags.push("--bins", String(checkInt("bins", options.bins)));
  }
  if (options.distance !== undefined) {
    flags.push("--distance", String(checkFinite("distance", options.distance)));
  }
  if (options.seed !== undefined) {
    flags.push("--seed", String(checkInt("seed", options.seed)));
  }
  const payload = corrupt(points, flags) as SingleViewResult;
  return { kept_indices: payload.kept_indices, points: payload.points };
}
