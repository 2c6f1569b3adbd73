/** Per-class opacity curve editor with tau slider and mode toggle. */

import { TfEditorState, evalOpacity } from "../tf.js";
import type { RenderMode } from "../types.js";
import { classColorCss } from "../types.js";

export class TfEditor {
  readonly root: HTMLDivElement;
  activeClass = 1;
  onChange: () => void = () => {};

  private curve: HTMLCanvasElement;
  private tauSlider: HTMLInputElement;
  private tauLabel: HTMLSpanElement;
  private modeToggle: HTMLButtonElement;
  private classRow: HTMLDivElement;
  private dragIndex: number | null = null;

  constructor(public state: TfEditorState) {
    this.root = document.createElement("div");
    this.root.className = "tf-editor";

    this.classRow = document.createElement("div");
    this.root.appendChild(this.classRow);

    this.curve = document.createElement("canvas");
    this.curve.width = 280;
    this.curve.height = 140;
    this.curve.style.border = "1px solid #444";
    this.root.appendChild(this.curve);

    const tauRow = document.createElement("div");
    this.tauSlider = document.createElement("input");
    this.tauSlider.type = "range";
    this.tauSlider.min = "0";
    this.tauSlider.max = "1";
    this.tauSlider.step = "0.01";
    this.tauLabel = document.createElement("span");
    tauRow.append("confidence threshold ", this.tauSlider, this.tauLabel);
    this.root.appendChild(tauRow);

    this.modeToggle = document.createElement("button");
    this.root.appendChild(this.modeToggle);

    this.tauSlider.addEventListener("input", () => {
      this.state.setTau(this.activeClass, Number(this.tauSlider.value));
      this.tauLabel.textContent = this.tauSlider.value;
      this.onChange();
    });
    this.modeToggle.addEventListener("click", () => {
      const next: RenderMode = this.state.mode === "probabilistic"
        ? "probability_intensity" : "probabilistic";
      this.state.setMode(next);
      this.redraw();
      this.onChange();
    });
    this.bindCurveEvents();
  }

  setClasses(classIds: number[]): void {
    this.state.ensureClasses(classIds);
    this.classRow.replaceChildren();
    for (const cid of classIds.filter((c) => c > 0)) {
      const btn = document.createElement("button");
      btn.textContent = `class ${cid}`;
      btn.style.background = classColorCss(cid);
      btn.addEventListener("click", () => {
        this.activeClass = cid;
        this.redraw();
      });
      this.classRow.appendChild(btn);
    }
    if (!classIds.includes(this.activeClass)) {
      this.activeClass = classIds.find((c) => c > 0) ?? 1;
    }
    this.redraw();
  }

  private activeTf() {
    return this.state.doc[String(this.activeClass)];
  }

  private curveToTf(ev: MouseEvent): { x: number; a: number } {
    const rect = this.curve.getBoundingClientRect();
    return {
      x: (ev.clientX - rect.left) / rect.width,
      a: 1 - (ev.clientY - rect.top) / rect.height,
    };
  }

  private bindCurveEvents(): void {
    this.curve.addEventListener("pointerdown", (ev) => {
      const tf = this.activeTf();
      if (!tf) return;
      const { x, a } = this.curveToTf(ev);
      const hit = tf.opacity.findIndex(
        (p) => Math.abs(p.x - x) < 0.03 && Math.abs(p.a - a) < 0.08);
      if (ev.shiftKey && hit >= 0) {
        this.state.removeOpacityPoint(this.activeClass, hit);
      } else if (hit >= 0) {
        this.dragIndex = hit;
      } else {
        this.dragIndex = this.state.addOpacityPoint(this.activeClass, x, a);
      }
      this.redraw();
    });
    this.curve.addEventListener("pointermove", (ev) => {
      if (this.dragIndex === null || this.dragIndex < 0) return;
      const { x, a } = this.curveToTf(ev);
      this.state.moveOpacityPoint(this.activeClass, this.dragIndex, x, a);
      this.redraw();
    });
    const finish = () => {
      if (this.dragIndex !== null) {
        this.dragIndex = null;
        this.onChange();
      }
    };
    this.curve.addEventListener("pointerup", finish);
    this.curve.addEventListener("pointerleave", finish);
  }

  redraw(): void {
    const tf = this.activeTf();
    const ctx = this.curve.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.curve;
    ctx.fillStyle = "#1b1b1b";
    ctx.fillRect(0, 0, width, height);
    if (!tf) return;
    ctx.strokeStyle = classColorCss(this.activeClass);
    ctx.lineWidth = 2;
    ctx.beginPath();
    for (let px = 0; px <= width; px++) {
      const a = evalOpacity(tf.opacity, px / width);
      const py = (1 - a) * height;
      if (px === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.stroke();
    ctx.fillStyle = "#fff";
    for (const p of tf.opacity) {
      ctx.beginPath();
      ctx.arc(p.x * width, (1 - p.a) * height, 4, 0, Math.PI * 2);
      ctx.fill();
    }
    this.tauSlider.value = String(tf.tau);
    this.tauLabel.textContent = tf.tau.toFixed(2);
    this.modeToggle.textContent = `mode: ${this.state.mode}`;
  }
}
