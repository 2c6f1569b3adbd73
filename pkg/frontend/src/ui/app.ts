/** Application wiring: volume registration, slice+brush panel, class
 * palette, TF editor, render panel, training progress, viewpoint gallery.
 */

import { ApiClient, ApiError, pollJob } from "../api.js";
import { ScribbleStore } from "../scribbles.js";
import { TfEditorState } from "../tf.js";
import type { VolumeInfo } from "../types.js";
import { classColorCss } from "../types.js";
import { ProgressBar, RenderPanel, ViewpointGallery } from "./panels.js";
import { SliceView } from "./sliceView.js";
import { TfEditor } from "./tfEditor.js";

export class App {
  private client: ApiClient;
  private root: HTMLElement;
  private banner: HTMLDivElement;
  private volume: VolumeInfo | null = null;
  private scribbles = new ScribbleStore();
  private tfState = new TfEditorState();
  private sliceView: SliceView | null = null;
  private tfEditor: TfEditor;
  private renderPanel: RenderPanel | null = null;
  private progress = new ProgressBar();
  private gallery = new ViewpointGallery();
  private classifyButton: HTMLButtonElement;
  private trainingDone = false;
  private classified = false;

  constructor(root: HTMLElement, baseUrl = "") {
    this.root = root;
    this.client = new ApiClient(baseUrl);
    this.banner = document.createElement("div");
    this.banner.className = "banner";
    this.tfEditor = new TfEditor(this.tfState);
    this.classifyButton = document.createElement("button");
    this.classifyButton.textContent = "classify";
    this.classifyButton.disabled = true;
    this.classifyButton.title = "draw scribbles for at least two classes first";
  }

  async start(volumePath: string): Promise<void> {
    this.volume = await this.client.registerVolume(volumePath);
    const dims = this.volume.dims;
    this.sliceView = new SliceView(this.client, this.volume.id, dims,
                                   this.scribbles);
    this.renderPanel = new RenderPanel(this.client, this.volume.id);
    this.layout();
    await this.sliceView.refresh();
    await this.train();
  }

  private layout(): void {
    if (!this.sliceView || !this.renderPanel) return;
    this.root.replaceChildren();
    this.root.appendChild(this.banner);
    const row = document.createElement("div");
    row.style.cssText = "display:flex;gap:16px;align-items:flex-start";
    const left = document.createElement("div");
    left.append(this.sliceView.canvas, this.sliceControls(), this.progress.root);
    const right = document.createElement("div");
    right.append(this.paletteRow(), this.classifyButton,
                 this.tfEditor.root, this.renderPanel.root, this.gallery.root);
    row.append(left, right);
    this.root.appendChild(row);

    this.sliceView.onStrokeEnd = () => void this.pushScribbles();
    this.tfEditor.onChange = () => void this.pushTfAndRender();
    this.classifyButton.addEventListener("click", () => void this.classify());
  }

  private sliceControls(): HTMLDivElement {
    const controls = document.createElement("div");
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = String((this.volume?.dims[2] ?? 1) - 1);
    slider.value = String(this.sliceView?.slice.index ?? 0);
    slider.addEventListener("input", () => {
      void this.sliceView?.setSlice(2, Number(slider.value));
    });
    const zoom = document.createElement("select");
    for (const z of [1, 2, 4, 8]) {
      const option = document.createElement("option");
      option.value = String(z);
      option.textContent = `${z}x`;
      if (z === 4) option.selected = true;
      zoom.appendChild(option);
    }
    zoom.addEventListener("change", () => {
      void this.sliceView?.setZoom(Number(zoom.value));
    });
    controls.append("slice ", slider, " zoom ", zoom);
    return controls;
  }

  private paletteRow(): HTMLDivElement {
    const row = document.createElement("div");
    row.append("brush: ");
    for (const cid of [0, 1, 2, 3, 4]) {
      const btn = document.createElement("button");
      btn.textContent = cid === 0 ? "background" : `class ${cid}`;
      btn.style.background = classColorCss(cid);
      btn.addEventListener("click", () => {
        if (this.sliceView) this.sliceView.brushClass = cid;
      });
      row.appendChild(btn);
    }
    const radius = document.createElement("input");
    radius.type = "range";
    radius.min = "1";
    radius.max = "12";
    radius.value = "2";
    radius.addEventListener("input", () => {
      if (this.sliceView) this.sliceView.brushRadius = Number(radius.value);
    });
    row.append(" radius ", radius);
    return row;
  }

  private async train(): Promise<void> {
    if (!this.volume) return;
    const ticket = await this.client.train(this.volume.id, {});
    const job = await pollJob(this.client, ticket.id,
                              (j) => this.progress.update(j));
    this.trainingDone = job.state === "done";
    this.updateClassifyButton();
    if (this.trainingDone) void this.loadViewpoints();
  }

  private updateClassifyButton(): void {
    const ready = this.trainingDone && this.scribbles.classIds().length >= 2;
    this.classifyButton.disabled = !ready;
    this.classifyButton.title = ready ? ""
      : "needs finished training and scribbles for at least two classes";
  }

  private async pushScribbles(): Promise<void> {
    if (!this.volume) return;
    const ack = await this.client.putScribbles(this.volume.id,
                                               this.scribbles.toDocument());
    this.scribbles.markSynced(ack.accepted);
    this.updateClassifyButton();
    await this.sliceView?.refresh();
  }

  private async classify(): Promise<void> {
    if (!this.volume || !this.sliceView) return;
    try {
      const result = await this.client.classify(this.volume.id, {});
      const accuracy = Object.entries(result.train_accuracy_per_class)
        .map(([cid, acc]) => `${cid}: ${(acc * 100).toFixed(0)}%`).join("  ");
      this.banner.textContent = `scribble accuracy — ${accuracy}`;
      this.classified = true;
      this.tfEditor.setClasses(result.classes);
      this.sliceView.overlay = "probability";
      await this.sliceView.refresh();
      await this.pushTfAndRender();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.banner.textContent = "training still running — try again when done";
      } else {
        throw err;
      }
    }
  }

  private tfPushTimer: ReturnType<typeof setTimeout> | null = null;

  private pushTfAndRender(): Promise<void> {
    // debounce bursts of TF edits into one PUT + render
    return new Promise((resolve) => {
      if (this.tfPushTimer) clearTimeout(this.tfPushTimer);
      this.tfPushTimer = setTimeout(async () => {
        if (!this.volume || !this.renderPanel || !this.classified) {
          resolve();
          return;
        }
        await this.client.putTf(this.volume.id, this.tfState.toDocument(),
                                this.tfState.mode);
        await this.renderPanel.refresh(this.tfState.mode);
        resolve();
      }, 150);
    });
  }

  private async loadViewpoints(): Promise<void> {
    if (!this.volume) return;
    const report = await this.client.viewpoints(this.volume.id,
                                                { thumbnails: true });
    this.gallery.show(report);
  }
}
