/** Editable transfer-function state with invariant enforcement.
 *
 * Control point edits keep x strictly increasing and all values clamped
 * to [0, 1], so the editor can never emit a document the service would
 * reject.
 */

import type { ClassTf, ColorPoint, OpacityPoint, RenderMode, TfDocument } from "./types.js";
import { classColor } from "./types.js";

const MIN_GAP = 1e-4;

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export function defaultClassTf(classId: number, tau = 0.5): ClassTf {
  const [r, g, b] = classColor(classId);
  return {
    color: [{ x: 0, r, g, b }, { x: 1, r, g, b }],
    opacity: [{ x: 0, a: 0 }, { x: 1, a: 0.9 }],
    tau,
  };
}

export class TfEditorState {
  doc: TfDocument = {};
  mode: RenderMode = "probability_intensity";

  ensureClasses(classIds: number[]): void {
    for (const cid of classIds) {
      if (cid > 0 && !(String(cid) in this.doc)) {
        this.doc[String(cid)] = defaultClassTf(cid);
      }
    }
  }

  /** Clamp an x between its neighbors, preserving strict monotonicity. */
  private boundedX(xs: number[], index: number, wanted: number): number {
    const lo = index > 0 ? xs[index - 1] + MIN_GAP : 0;
    const hi = index < xs.length - 1 ? xs[index + 1] - MIN_GAP : 1;
    return Math.min(hi, Math.max(lo, clamp01(wanted)));
  }

  moveOpacityPoint(classId: number, index: number, x: number, a: number): void {
    const tf = this.doc[String(classId)];
    if (!tf || index < 0 || index >= tf.opacity.length) return;
    const xs = tf.opacity.map((p) => p.x);
    tf.opacity[index] = { x: this.boundedX(xs, index, x), a: clamp01(a) };
  }

  addOpacityPoint(classId: number, x: number, a: number): number {
    const tf = this.doc[String(classId)];
    if (!tf) return -1;
    const cx = clamp01(x);
    let index = tf.opacity.findIndex((p) => p.x > cx);
    if (index === -1) index = tf.opacity.length;
    const prev = tf.opacity[index - 1];
    const next = tf.opacity[index];
    if ((prev && Math.abs(prev.x - cx) < MIN_GAP)
        || (next && Math.abs(next.x - cx) < MIN_GAP)) {
      return -1;                            // would collide with a neighbor
    }
    tf.opacity.splice(index, 0, { x: cx, a: clamp01(a) });
    return index;
  }

  removeOpacityPoint(classId: number, index: number): boolean {
    const tf = this.doc[String(classId)];
    if (!tf || tf.opacity.length <= 2) return false;  // keep >= 2 points
    if (index <= 0 || index >= tf.opacity.length - 1) return false;
    tf.opacity.splice(index, 1);
    return true;
  }

  setColor(classId: number, r: number, g: number, b: number): void {
    const tf = this.doc[String(classId)];
    if (!tf) return;
    tf.color = tf.color.map((p) => ({
      x: p.x, r: clamp01(r), g: clamp01(g), b: clamp01(b),
    }));
  }

  setTau(classId: number, tau: number): void {
    const tf = this.doc[String(classId)];
    if (tf) tf.tau = clamp01(tau);
  }

  setMode(mode: RenderMode): void {
    this.mode = mode;
  }

  /** Silence a class entirely (its opacity TF becomes all-zero). */
  muteClass(classId: number): void {
    const tf = this.doc[String(classId)];
    if (tf) tf.opacity = tf.opacity.map((p) => ({ x: p.x, a: 0 }));
  }

  validate(): void {
    for (const [cid, tf] of Object.entries(this.doc)) {
      for (const pts of [tf.color, tf.opacity] as
           Array<Array<ColorPoint | OpacityPoint>>) {
        if (pts.length < 2) {
          throw new Error(`class ${cid}: needs at least 2 control points`);
        }
        for (let i = 1; i < pts.length; i++) {
          if (pts[i].x <= pts[i - 1].x) {
            throw new Error(`class ${cid}: x must be strictly increasing`);
          }
        }
      }
      if (tf.tau < 0 || tf.tau > 1) {
        throw new Error(`class ${cid}: tau out of range`);
      }
    }
  }

  toDocument(): TfDocument {
    this.validate();
    return JSON.parse(JSON.stringify(this.doc));
  }
}

/** Evaluate a piecewise-linear opacity TF (for drawing the editor curve). */
export function evalOpacity(points: OpacityPoint[], x: number): number {
  if (x <= points[0].x) return points[0].a;
  const last = points[points.length - 1];
  if (x >= last.x) return last.a;
  for (let i = 1; i < points.length; i++) {
    if (x <= points[i].x) {
      const t = (x - points[i - 1].x) / (points[i].x - points[i - 1].x);
      return points[i - 1].a + t * (points[i].a - points[i - 1].a);
    }
  }
  return last.a;
}
