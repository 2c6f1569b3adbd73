/** Documents exchanged with the voxplore HTTP service. */

export interface VolumeInfo {
  id: string;
  dims: [number, number, number];
  spacing: [number, number, number];
}

export interface JobInfo {
  id: string;
  kind: string;
  state: "idle" | "running" | "done" | "failed";
  progress: number;
  epoch_losses: Array<{ epoch: number; total: number }>;
  error: string | null;
  cache_hit: boolean | null;
}

export interface SliceRef {
  axis: 0 | 1 | 2;
  index: number;
}

export interface ScribbleEntry {
  voxel: [number, number, number];
  class: number;
  stroke: number;
  slice?: SliceRef;
}

export interface ScribbleAck {
  accepted: number;
  per_class: Record<string, number>;
  conflicts: number;
}

export interface ColorPoint {
  x: number;
  r: number;
  g: number;
  b: number;
}

export interface OpacityPoint {
  x: number;
  a: number;
}

export interface ClassTf {
  color: ColorPoint[];
  opacity: OpacityPoint[];
  tau: number;
}

/** Per-class TF pairs keyed by the class id (as a string, JSON-style). */
export type TfDocument = Record<string, ClassTf>;

export type RenderMode = "probabilistic" | "probability_intensity";

export interface CameraDoc {
  direction?: [number, number, number];
  width?: number;
  height?: number;
  fov_y_deg?: number;
}

export interface ClassifyResponse {
  classes: number[];
  n_scribbles: number;
  train_accuracy_per_class: Record<string, number>;
  tau: number;
}

export interface ViewpointReportDoc {
  K: number;
  M: number;
  viewpoints: Array<{ dir: [number, number, number]; entropy: number }>;
  selected: Array<{ index: number; coverage: number }>;
  thumbnails_png_b64?: string[];
}

export type Overlay = "none" | "scribbles" | "probability" | "label";

/** Class palette mirrored from the service's slice renderer. */
export const CLASS_PALETTE: Array<[number, number, number]> = [
  [0.45, 0.45, 0.45],
  [0.894, 0.102, 0.11],
  [0.216, 0.494, 0.722],
  [0.302, 0.686, 0.29],
  [0.596, 0.306, 0.639],
  [1.0, 0.498, 0.0],
  [0.969, 0.867, 0.212],
  [0.651, 0.337, 0.157],
  [0.969, 0.506, 0.749],
  [0.6, 0.6, 0.6],
];

export function classColor(classId: number): [number, number, number] {
  if (classId === 0) return CLASS_PALETTE[0];
  return CLASS_PALETTE[1 + ((classId - 1) % (CLASS_PALETTE.length - 1))];
}

export function classColorCss(classId: number): string {
  const [r, g, b] = classColor(classId);
  return `rgb(${Math.round(r * 255)}, ${Math.round(g * 255)}, ${Math.round(b * 255)})`;
}
