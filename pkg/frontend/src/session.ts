/** Client-side session state: the cloud plus the current per-point
 * ids, kept in sync by applying the server's voxel-level deltas. */

import { Cloud, VoxelDelta } from "./protocol.js";

export class SessionState {
  readonly cloud: Cloud;
  /** voxel index -> point indices, for delta application */
  private readonly voxelMembers: Map<number, number[]>;
  /** latest per-object IoUs reported by the server (gt sessions only) */
  ious: Record<string, number> = {};
  nClicks = 0;

  constructor(cloud: Cloud) {
    this.cloud = cloud;
    this.voxelMembers = new Map();
    for (let p = 0; p < cloud.header.count; p++) {
      const v = cloud.voxelOf[p];
      const members = this.voxelMembers.get(v);
      if (members === undefined) {
        this.voxelMembers.set(v, [p]);
      } else {
        members.push(p);
      }
    }
  }

  /** Apply a server delta atomically to the per-point id array. */
  applyDelta(changed: VoxelDelta, ious: Record<string, number>): void {
    for (const [voxel, id] of changed) {
      const members = this.voxelMembers.get(voxel);
      if (members === undefined) {
        continue; // voxel fell outside the render subsample
      }
      for (const p of members) {
        this.cloud.ids[p] = id;
      }
    }
    this.ious = ious;
  }

  /** Snapshot of the ids, for undo verification and state comparison. */
  idsSnapshot(): Int32Array {
    return this.cloud.ids.slice();
  }

  /** Object ids currently present (excluding background). */
  presentIds(): number[] {
    const seen = new Set<number>();
    for (let p = 0; p < this.cloud.header.count; p++) {
      if (this.cloud.ids[p] !== 0) {
        seen.add(this.cloud.ids[p]);
      }
    }
    return [...seen].sort((a, b) => a - b);
  }
}

export function idsEqual(a: Int32Array, b: Int32Array): boolean {
  if (a.length !== b.length) {
    return false;
  }
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) {
      return false;
    }
  }
  return true;
}
