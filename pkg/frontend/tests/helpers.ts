import { Cloud, CloudHeader } from "../src/protocol.js";

/** Build a synthetic decoded cloud for unit tests. */
export function makeCloud(opts: {
  positions: number[][];
  scanIndex?: number[];
  voxelOf?: number[];
  ids?: number[];
}): Cloud {
  const n = opts.positions.length;
  const header: CloudHeader = {
    count: n,
    total: n,
    window: { start: 0, length: 1 },
    fields: ["positions:f32x3", "scan_index:i32", "voxel:i32", "ids:i32"],
  };
  return {
    header,
    positions: new Float32Array(opts.positions.flat()),
    scanIndex: new Int32Array(opts.scanIndex ?? new Array(n).fill(0)),
    voxelOf: new Int32Array(opts.voxelOf ?? [...Array(n).keys()]),
    ids: new Int32Array(opts.ids ?? new Array(n).fill(0)),
  };
}

/** Encode a cloud the way the server does, for decoder tests. */
export function encodeCloudBlob(cloud: Cloud): ArrayBuffer {
  const headerBytes = new TextEncoder().encode(JSON.stringify(cloud.header));
  const n = cloud.header.count;
  const total = 4 + headerBytes.length + n * (12 + 4 + 4 + 4);
  const buffer = new ArrayBuffer(total);
  const bytes = new Uint8Array(buffer);
  new DataView(buffer).setUint32(0, headerBytes.length, true);
  bytes.set(headerBytes, 4);
  // byte-wise copies: the header length need not be 4-byte aligned
  let offset = 4 + headerBytes.length;
  bytes.set(new Uint8Array(cloud.positions.buffer.slice(0)), offset);
  offset += n * 12;
  bytes.set(new Uint8Array(cloud.scanIndex.buffer.slice(0)), offset);
  offset += n * 4;
  bytes.set(new Uint8Array(cloud.voxelOf.buffer.slice(0)), offset);
  offset += n * 4;
  bytes.set(new Uint8Array(cloud.ids.buffer.slice(0)), offset);
  return buffer;
}
