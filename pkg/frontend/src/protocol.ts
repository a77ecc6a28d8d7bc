/** Wire types and binary decoding for the annotation server protocol. */

export interface WindowRef {
  start: number;
  tau?: number;
  scene?: number;
}

export interface SessionInfo {
  id: string;
  n_points: number;
  n_voxels?: number;
  window: { start: number; length: number };
  has_gt: boolean;
}

/** [voxel index, new object id] pairs. */
export type VoxelDelta = [number, number][];

export interface ClickResult {
  changed: VoxelDelta;
  ious: Record<string, number>;
  order: number;
}

export interface UndoResult {
  noop: boolean;
  changed: VoxelDelta;
  ious: Record<string, number>;
}

export interface ExportResult {
  dir: string;
  files: string[];
  trace_file: string;
  trace: { scene: number; window: number; click: ClickRecord }[];
}

export interface ClickRecord {
  pos: [number, number, number];
  scan: number;
  object: number;
  order: number;
  iteration: number;
}

export interface CloudHeader {
  count: number;
  total: number;
  window: { start: number; length: number };
  fields: string[];
}

export interface Cloud {
  header: CloudHeader;
  /** xyz triples, length 3 * count */
  positions: Float32Array;
  scanIndex: Int32Array;
  /** voxel index per point, for applying voxel-level deltas */
  voxelOf: Int32Array;
  /** current object id per point */
  ids: Int32Array;
}

const EXPECTED_FIELDS = ["positions:f32x3", "scan_index:i32", "voxel:i32", "ids:i32"];

/**
 * Decode the server's cloud frame: a little-endian uint32 header
 * length, a JSON header, then tightly packed typed columns.
 */
export function decodeCloudBlob(buffer: ArrayBuffer): Cloud {
  if (buffer.byteLength < 4) {
    throw new Error("cloud frame too short for header length");
  }
  const view = new DataView(buffer);
  const headerLen = view.getUint32(0, true);
  if (4 + headerLen > buffer.byteLength) {
    throw new Error("cloud frame truncated inside header");
  }
  const headerText = new TextDecoder().decode(new Uint8Array(buffer, 4, headerLen));
  const header = JSON.parse(headerText) as CloudHeader;
  if (JSON.stringify(header.fields) !== JSON.stringify(EXPECTED_FIELDS)) {
    throw new Error(`unexpected cloud fields: ${header.fields.join(", ")}`);
  }
  const n = header.count;
  const expected = 4 + headerLen + n * (12 + 4 + 4 + 4);
  if (buffer.byteLength !== expected) {
    throw new Error(`cloud frame size ${buffer.byteLength}, expected ${expected}`);
  }
  let offset = 4 + headerLen;
  const positions = readF32(buffer, offset, n * 3);
  offset += n * 12;
  const scanIndex = readI32(buffer, offset, n);
  offset += n * 4;
  const voxelOf = readI32(buffer, offset, n);
  offset += n * 4;
  const ids = readI32(buffer, offset, n);
  return { header, positions, scanIndex, voxelOf, ids };
}

function readF32(buffer: ArrayBuffer, offset: number, count: number): Float32Array {
  // copy so alignment of the source slice never matters
  return new Float32Array(buffer.slice(offset, offset + count * 4));
}

function readI32(buffer: ArrayBuffer, offset: number, count: number): Int32Array {
  return new Int32Array(buffer.slice(offset, offset + count * 4));
}

/** Messages the client sends over the WebSocket channel. */
export type OutboundMessage =
  | { type: "create"; window: WindowRef; segmenter?: string }
  | { type: "click"; pos: [number, number, number]; object: number }
  | { type: "undo" }
  | { type: "export" };

/** Messages the server sends back. */
export type InboundMessage =
  | ({ type: "created" } & Pick<SessionInfo, "id" | "n_points" | "has_gt">)
  | ({ type: "state_delta" } & Partial<ClickResult & UndoResult>)
  | { type: "rejected"; msg: string }
  | ({ type: "exported" } & ExportResult)
  | { type: "error"; msg: string };
