/** Small presentation panels: render view, progress bar, viewpoint gallery. */

import { ApiClient } from "../api.js";
import type { JobInfo, RenderMode, ViewpointReportDoc } from "../types.js";

export class RenderPanel {
  readonly root: HTMLDivElement;
  private img: HTMLImageElement;
  private pending = false;
  private queued = false;

  constructor(private client: ApiClient, private volumeId: string) {
    this.root = document.createElement("div");
    this.img = document.createElement("img");
    this.img.width = 360;
    this.img.height = 360;
    this.img.style.background = "#000";
    this.root.appendChild(this.img);
  }

  /** Re-render, coalescing bursts of requests (latest wins). */
  async refresh(mode: RenderMode): Promise<void> {
    if (this.pending) {
      this.queued = true;
      return;
    }
    this.pending = true;
    try {
      const blob = await this.client.render(this.volumeId, mode,
                                            { width: 360, height: 360 });
      this.img.src = URL.createObjectURL(blob);
    } finally {
      this.pending = false;
      if (this.queued) {
        this.queued = false;
        void this.refresh(mode);
      }
    }
  }
}

export class ProgressBar {
  readonly root: HTMLDivElement;
  private bar: HTMLDivElement;
  private label: HTMLSpanElement;

  constructor() {
    this.root = document.createElement("div");
    this.root.className = "progress";
    const track = document.createElement("div");
    track.style.cssText = "width:280px;height:10px;background:#333";
    this.bar = document.createElement("div");
    this.bar.style.cssText = "width:0;height:10px;background:#4a9";
    track.appendChild(this.bar);
    this.label = document.createElement("span");
    this.root.append(track, this.label);
  }

  update(job: JobInfo): void {
    this.bar.style.width = `${Math.round(job.progress * 100)}%`;
    const last = job.epoch_losses[job.epoch_losses.length - 1];
    this.label.textContent = job.state === "running"
      ? ` training ${Math.round(job.progress * 100)}%`
        + (last ? ` (loss ${last.total.toExponential(2)})` : "")
      : ` ${job.state}${job.error ? `: ${job.error}` : ""}`;
  }
}

export class ViewpointGallery {
  readonly root: HTMLDivElement;

  constructor() {
    this.root = document.createElement("div");
    this.root.className = "viewpoint-gallery";
    this.root.style.cssText = "display:flex;gap:8px;flex-wrap:wrap";
  }

  show(report: ViewpointReportDoc): void {
    this.root.replaceChildren();
    report.selected.forEach((sel, rank) => {
      const cell = document.createElement("figure");
      if (report.thumbnails_png_b64 && report.thumbnails_png_b64[rank]) {
        const img = document.createElement("img");
        img.src = `data:image/png;base64,${report.thumbnails_png_b64[rank]}`;
        img.width = 128;
        cell.appendChild(img);
      }
      const caption = document.createElement("figcaption");
      const entropy = report.viewpoints[sel.index]?.entropy ?? 0;
      caption.textContent = `#${rank + 1} view ${sel.index} `
        + `coverage ${(sel.coverage * 100).toFixed(0)}% H=${entropy.toFixed(2)}`;
      cell.appendChild(caption);
      this.root.appendChild(cell);
    });
  }
}
