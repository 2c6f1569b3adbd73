/** Slice viewer panel: server-rendered slice bitmap + brush scribbling. */

import { ApiClient } from "../api.js";
import { ScribbleStore } from "../scribbles.js";
import { brushVoxels, imageSize, ViewState } from "../transform.js";
import type { Overlay, SliceRef } from "../types.js";

export class SliceView {
  readonly canvas: HTMLCanvasElement;
  view: ViewState = { zoom: 4, panX: 0, panY: 0 };
  slice: SliceRef = { axis: 2, index: 0 };
  overlay: Overlay = "scribbles";
  brushClass = 1;
  brushRadius = 2;
  onStrokeEnd: () => void = () => {};

  private image: HTMLImageElement | null = null;
  private activeStroke: number | null = null;
  private localMarks: Array<{ x: number; y: number; cls: number }> = [];

  constructor(private client: ApiClient, private volumeId: string,
              private dims: [number, number, number],
              public scribbles: ScribbleStore,
              width = 560, height = 560) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = width;
    this.canvas.height = height;
    this.canvas.style.touchAction = "none";
    this.canvas.style.imageRendering = "pixelated";
    this.slice.index = Math.floor(dims[2] / 2);
    this.fitZoom();
    this.bindPointerEvents();
  }

  private fitZoom(): void {
    const { width, height } = imageSize(this.dims, this.slice.axis);
    const zoom = Math.max(1, Math.floor(Math.min(
      this.canvas.width / width, this.canvas.height / height)));
    this.view = {
      zoom,
      panX: Math.floor((this.canvas.width - width * zoom) / 2),
      panY: Math.floor((this.canvas.height - height * zoom) / 2),
    };
  }

  setSlice(axis: 0 | 1 | 2, index: number): Promise<void> {
    this.slice = { axis, index };
    this.fitZoom();
    return this.refresh();
  }

  setZoom(zoom: number): Promise<void> {
    this.view.zoom = Math.max(1, zoom);
    this.fitZoom();
    this.view.zoom = Math.max(1, zoom);
    return this.refresh();
  }

  async refresh(): Promise<void> {
    const blob = await this.client.fetchSlice(
      this.volumeId, this.slice.axis, this.slice.index, this.overlay, 1.0);
    const image = new Image();
    image.src = URL.createObjectURL(blob);
    await image.decode();
    this.image = image;
    this.localMarks = [];
    this.draw();
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.imageSmoothingEnabled = false;
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.image) {
      ctx.drawImage(this.image, this.view.panX, this.view.panY,
                    this.image.width * this.view.zoom,
                    this.image.height * this.view.zoom);
    }
    // optimistic local marks until the server echoes them back
    for (const mark of this.localMarks) {
      ctx.fillStyle = mark.cls === 0 ? "#737373" : cssForClass(mark.cls);
      ctx.fillRect(mark.x * this.view.zoom + this.view.panX,
                   mark.y * this.view.zoom + this.view.panY,
                   this.view.zoom, this.view.zoom);
    }
  }

  private bindPointerEvents(): void {
    this.canvas.addEventListener("pointerdown", (ev) => {
      this.canvas.setPointerCapture(ev.pointerId);
      this.activeStroke = this.scribbles.beginStroke(this.slice);
      this.paintAt(ev);
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (this.activeStroke !== null) this.paintAt(ev);
    });
    const finish = () => {
      if (this.activeStroke !== null) {
        this.activeStroke = null;
        this.onStrokeEnd();
      }
    };
    this.canvas.addEventListener("pointerup", finish);
    this.canvas.addEventListener("pointercancel", finish);
  }

  private paintAt(ev: PointerEvent): void {
    if (this.activeStroke === null) return;
    const rect = this.canvas.getBoundingClientRect();
    const cx = ev.clientX - rect.left;
    const cy = ev.clientY - rect.top;
    const voxels = brushVoxels(cx, cy, this.brushRadius, this.view,
                               this.dims, this.slice);
    this.scribbles.extend(this.activeStroke, this.brushClass, this.slice, voxels);
    for (const voxel of voxels) {
      const [colAxis, rowAxis] = this.slice.axis === 0 ? [1, 2]
        : this.slice.axis === 1 ? [0, 2] : [0, 1];
      this.localMarks.push({ x: voxel[colAxis], y: voxel[rowAxis],
                             cls: this.brushClass });
    }
    this.draw();
  }
}

function cssForClass(classId: number): string {
  const palette = ["#737373", "#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
                   "#ff7f00", "#f7dd36", "#a65628", "#f781bf", "#999999"];
  if (classId === 0) return palette[0];
  return palette[1 + ((classId - 1) % (palette.length - 1))];
}
