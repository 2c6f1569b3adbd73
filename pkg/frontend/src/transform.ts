/** Canvas <-> voxel mapping for the slice viewer.
 *
 * The service renders a slice of axis k as an image whose columns follow
 * the lower remaining volume axis and whose rows follow the higher one,
 * row 0 at the top.  The viewer draws that image scaled by an integer or
 * fractional zoom with a pixel pan offset; these helpers invert that
 * composition exactly on voxel centers.
 */

import type { SliceRef } from "./types.js";

export interface ViewState {
  zoom: number;            // canvas pixels per image pixel
  panX: number;            // canvas-space offset of image pixel (0, 0)
  panY: number;
}

export interface ImagePoint {
  col: number;
  row: number;
}

/** Volume axes forming (columns, rows) of a slice image. */
export function sliceAxes(axis: 0 | 1 | 2): [number, number] {
  const rest = [0, 1, 2].filter((a) => a !== axis) as [number, number];
  return rest;                              // ascending: [cols, rows]
}

export function canvasToImage(
  cx: number, cy: number, view: ViewState): ImagePoint {
  return {
    col: Math.floor((cx - view.panX) / view.zoom),
    row: Math.floor((cy - view.panY) / view.zoom),
  };
}

/** Canvas position of an image pixel's center. */
export function imageToCanvas(
  col: number, row: number, view: ViewState): { x: number; y: number } {
  return {
    x: (col + 0.5) * view.zoom + view.panX,
    y: (row + 0.5) * view.zoom + view.panY,
  };
}

export function imageToVoxel(
  p: ImagePoint, slice: SliceRef): [number, number, number] {
  const [colAxis, rowAxis] = sliceAxes(slice.axis);
  const voxel: [number, number, number] = [0, 0, 0];
  voxel[colAxis] = p.col;
  voxel[rowAxis] = p.row;
  voxel[slice.axis] = slice.index;
  return voxel;
}

export function voxelToImage(
  voxel: [number, number, number], slice: SliceRef): ImagePoint {
  const [colAxis, rowAxis] = sliceAxes(slice.axis);
  return { col: voxel[colAxis], row: voxel[rowAxis] };
}

export function imageSize(
  dims: [number, number, number], axis: 0 | 1 | 2): { width: number; height: number } {
  const [colAxis, rowAxis] = sliceAxes(axis);
  return { width: dims[colAxis], height: dims[rowAxis] };
}

/** Image pixels under a circular canvas brush, clipped to the slice.
 *
 * The brush radius is measured in canvas pixels; radius 1 paints exactly
 * the pixel under the pointer.
 */
export function brushFootprint(
  cx: number, cy: number, radiusPx: number, view: ViewState,
  width: number, height: number): ImagePoint[] {
  const center = canvasToImage(cx, cy, view);
  if (radiusPx <= 1) {
    return center.col >= 0 && center.col < width
        && center.row >= 0 && center.row < height ? [center] : [];
  }
  const reach = Math.ceil(radiusPx / view.zoom);
  const out: ImagePoint[] = [];
  for (let dr = -reach; dr <= reach; dr++) {
    for (let dc = -reach; dc <= reach; dc++) {
      const col = center.col + dc;
      const row = center.row + dr;
      if (col < 0 || col >= width || row < 0 || row >= height) continue;
      const { x, y } = imageToCanvas(col, row, view);
      if ((x - cx) ** 2 + (y - cy) ** 2 <= radiusPx * radiusPx) {
        out.push({ col, row });
      }
    }
  }
  return out;
}

/** Full canvas -> voxel brush application for one pointer sample. */
export function brushVoxels(
  cx: number, cy: number, radiusPx: number, view: ViewState,
  dims: [number, number, number], slice: SliceRef): Array<[number, number, number]> {
  const { width, height } = imageSize(dims, slice.axis);
  return brushFootprint(cx, cy, radiusPx, view, width, height)
    .map((p) => imageToVoxel(p, slice));
}
