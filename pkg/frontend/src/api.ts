/** Typed client for the voxplore HTTP service. */

import type {
  CameraDoc, ClassifyResponse, JobInfo, Overlay, RenderMode, ScribbleAck,
  ScribbleEntry, TfDocument, ViewpointReportDoc, VolumeInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`HTTP ${status}: ${JSON.stringify(body)}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => null);
  if (!response.ok) throw new ApiError(response.status, body);
  return body as T;
}

export class ApiClient {
  constructor(public baseUrl: string = "",
              private fetchFn: typeof fetch = fetch) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return asJson<T>(response);
  }

  private async put<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return asJson<T>(response);
  }

  registerVolume(path: string): Promise<VolumeInfo> {
    return this.post("/volumes", { path });
  }

  uploadVolume(dims: [number, number, number], dtype: string,
               dataB64: string): Promise<VolumeInfo> {
    return this.post("/volumes", { dims, dtype, data_b64: dataB64 });
  }

  train(volumeId: string, overrides: Record<string, unknown> = {}): Promise<JobInfo> {
    return this.post(`/volumes/${volumeId}/train`, overrides);
  }

  async job(jobId: string): Promise<JobInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/jobs/${jobId}`);
    return asJson<JobInfo>(response);
  }

  putScribbles(volumeId: string, entries: ScribbleEntry[]): Promise<ScribbleAck> {
    return this.put(`${"/volumes/"}${volumeId}/scribbles`, { entries });
  }

  classify(volumeId: string,
           options: Record<string, unknown> = {}): Promise<ClassifyResponse> {
    return this.post(`/volumes/${volumeId}/classify`, options);
  }

  sliceUrl(volumeId: string, axis: number, index: number, overlay: Overlay,
           overlayAlpha = 0.6, cacheBust?: number): string {
    const params = new URLSearchParams({
      axis: String(axis), index: String(index), overlay,
      overlay_alpha: String(overlayAlpha),
    });
    if (cacheBust !== undefined) params.set("t", String(cacheBust));
    return `${this.baseUrl}/volumes/${volumeId}/slice?${params}`;
  }

  async fetchSlice(volumeId: string, axis: number, index: number,
                   overlay: Overlay, overlayAlpha = 0.6): Promise<Blob> {
    const response = await this.fetchFn(
      this.sliceUrl(volumeId, axis, index, overlay, overlayAlpha));
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
    return response.blob();
  }

  putTf(volumeId: string, doc: TfDocument,
        mode?: RenderMode): Promise<{ classes: number[]; mode: RenderMode }> {
    const body: Record<string, unknown> = { ...doc };
    if (mode) body.mode = mode;
    return this.put(`/volumes/${volumeId}/tf`, body);
  }

  async render(volumeId: string, mode: RenderMode,
               camera: CameraDoc = {}): Promise<Blob> {
    const response = await this.fetchFn(`${this.baseUrl}/volumes/${volumeId}/render`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mode, camera }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.json().catch(() => null));
    }
    return response.blob();
  }

  viewpoints(volumeId: string,
             options: Record<string, unknown> = {}): Promise<ViewpointReportDoc> {
    return this.post(`/volumes/${volumeId}/viewpoints`, options);
  }
}

/** Poll a training job until it settles; reports progress along the way. */
export async function pollJob(
  client: ApiClient, jobId: string,
  onProgress: (job: JobInfo) => void,
  intervalMs = 500,
  sleep: (ms: number) => Promise<void> =
    (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
): Promise<JobInfo> {
  for (;;) {
    const job = await client.job(jobId);
    onProgress(job);
    if (job.state === "done" || job.state === "failed") return job;
    await sleep(intervalMs);
  }
}
