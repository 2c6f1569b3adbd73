/** Local scribble state mirroring the service's replace semantics.
 *
 * Strokes accumulate locally with last-write-wins per voxel; every stroke
 * end re-PUTs the full set, and the local state is considered in sync
 * only after the service acknowledges it.
 */

import type { ScribbleEntry, SliceRef } from "./types.js";

export interface BrushState {
  classId: number;
  radiusPx: number;
  slice: SliceRef;
}

function voxelKey(v: [number, number, number]): string {
  return `${v[0]},${v[1]},${v[2]}`;
}

export class ScribbleStore {
  private entries = new Map<string, ScribbleEntry>();
  private nextStroke = 0;
  private syncedCount: number | null = null;

  /** Begin a stroke; returns its id for subsequent extend() calls. */
  beginStroke(slice: SliceRef): number {
    this.syncedCount = null;
    return this.nextStroke++;
  }

  /** Add brush voxels to a stroke (deduplicated, last write wins). */
  extend(strokeId: number, classId: number, slice: SliceRef,
         voxels: Array<[number, number, number]>): number {
    let added = 0;
    for (const voxel of voxels) {
      const key = voxelKey(voxel);
      if (!this.entries.has(key)) added++;
      this.entries.set(key, {
        voxel, class: classId, stroke: strokeId, slice: { ...slice },
      });
    }
    if (added > 0) this.syncedCount = null;
    return added;
  }

  get size(): number {
    return this.entries.size;
  }

  classCounts(): Map<number, number> {
    const counts = new Map<number, number>();
    for (const entry of this.entries.values()) {
      counts.set(entry.class, (counts.get(entry.class) ?? 0) + 1);
    }
    return counts;
  }

  /** Distinct class ids present, ascending. */
  classIds(): number[] {
    return [...this.classCounts().keys()].sort((a, b) => a - b);
  }

  toDocument(): ScribbleEntry[] {
    return [...this.entries.values()].map((e) => ({ ...e, voxel: [...e.voxel] as
      [number, number, number] }));
  }

  clear(): void {
    this.entries.clear();
    this.syncedCount = null;
  }

  /** Record the service acknowledgment of the last PUT. */
  markSynced(acceptedCount: number): void {
    this.syncedCount = acceptedCount;
  }

  /** True when the last acknowledged server state matches local state. */
  get inSync(): boolean {
    return this.syncedCount === this.entries.size;
  }
}
