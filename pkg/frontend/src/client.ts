/** Annotation client: drives a server session with one in-flight
 * mutation at a time, optimistic click highlights, and state updates
 * applied only on server confirmation. */

import {
  ClickResult,
  decodeCloudBlob,
  ExportResult,
  SessionInfo,
  UndoResult,
  WindowRef,
} from "./protocol.js";
import { SessionState } from "./session.js";

/** Server transport; the REST implementation below is the default,
 * tests may substitute their own. */
export interface Transport {
  createSession(window: WindowRef, segmenter?: string): Promise<SessionInfo>;
  fetchCloud(sessionId: string): Promise<ArrayBuffer>;
  click(
    sessionId: string,
    pos: [number, number, number],
    object: number,
  ): Promise<ClickResult | { rejected: string }>;
  undo(sessionId: string): Promise<UndoResult>;
  exportSession(sessionId: string): Promise<ExportResult>;
}

export class HttpTransport implements Transport {
  constructor(private readonly baseUrl: string) {}

  private async post<T>(path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`server error ${resp.status}: ${detail}`);
    }
    return (await resp.json()) as T;
  }

  createSession(window: WindowRef, segmenter?: string): Promise<SessionInfo> {
    return this.post("/sessions", { window, segmenter });
  }

  async fetchCloud(sessionId: string): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.baseUrl}/sessions/${sessionId}/cloud`);
    if (!resp.ok) {
      throw new Error(`cloud fetch failed: ${resp.status}`);
    }
    return resp.arrayBuffer();
  }

  click(sessionId: string, pos: [number, number, number], object: number) {
    return this.post<ClickResult | { rejected: string }>(
      `/sessions/${sessionId}/click`,
      { pos, object },
    );
  }

  undo(sessionId: string): Promise<UndoResult> {
    return this.post(`/sessions/${sessionId}/undo`);
  }

  exportSession(sessionId: string): Promise<ExportResult> {
    return this.post(`/sessions/${sessionId}/export`);
  }
}

export interface ClickOutcome {
  accepted: boolean;
  /** server-assigned order; strictly increasing per session */
  order?: number;
  ious: Record<string, number>;
}

export class AnnotationClient {
  state: SessionState | null = null;
  info: SessionInfo | null = null;
  /** points optimistically highlighted until the server confirms */
  readonly pendingHighlights = new Set<number>();
  private queue: Promise<unknown> = Promise.resolve();
  private lastOrder = -1;

  constructor(private readonly transport: Transport) {}

  /** Serialize mutations: one in-flight request at a time, applied in
   * server-confirmed order. */
  private enqueue<T>(job: () => Promise<T>): Promise<T> {
    const next = this.queue.then(job, job);
    this.queue = next.catch(() => undefined);
    return next;
  }

  async connect(window: WindowRef, segmenter?: string): Promise<SessionInfo> {
    const info = await this.transport.createSession(window, segmenter);
    const blob = await this.transport.fetchCloud(info.id);
    this.state = new SessionState(decodeCloudBlob(blob));
    this.info = info;
    this.lastOrder = -1;
    return info;
  }

  private session(): { state: SessionState; id: string } {
    if (this.state === null || this.info === null) {
      throw new Error("no active session");
    }
    return { state: this.state, id: this.info.id };
  }

  click(
    pos: [number, number, number],
    object: number,
    optimisticPoint?: number,
  ): Promise<ClickOutcome> {
    const { state, id } = this.session();
    if (optimisticPoint !== undefined) {
      this.pendingHighlights.add(optimisticPoint);
    }
    return this.enqueue(async () => {
      try {
        const result = await this.transport.click(id, pos, object);
        if ("rejected" in result) {
          return { accepted: false, ious: state.ious };
        }
        if (result.order <= this.lastOrder) {
          throw new Error(
            `out-of-order click confirmation: ${result.order} after ${this.lastOrder}`,
          );
        }
        this.lastOrder = result.order;
        state.applyDelta(result.changed, result.ious);
        state.nClicks += 1;
        return { accepted: true, order: result.order, ious: result.ious };
      } finally {
        if (optimisticPoint !== undefined) {
          this.pendingHighlights.delete(optimisticPoint);
        }
      }
    });
  }

  undo(): Promise<UndoResult> {
    const { state, id } = this.session();
    return this.enqueue(async () => {
      const result = await this.transport.undo(id);
      if (!result.noop) {
        state.applyDelta(result.changed, result.ious);
        state.nClicks -= 1;
        this.lastOrder -= 1;
      }
      return result;
    });
  }

  exportSession(): Promise<ExportResult> {
    const { id } = this.session();
    return this.enqueue(() => this.transport.exportSession(id));
  }

  /** Re-fetch the authoritative cloud; rendering it must match the
   * incrementally maintained state. */
  async refetch(): Promise<SessionState> {
    const { id } = this.session();
    const blob = await this.transport.fetchCloud(id);
    return new SessionState(decodeCloudBlob(blob));
  }

  /** Smallest id not yet used by any click or prediction. */
  nextObjectId(): number {
    const { state } = this.session();
    const used = new Set(state.presentIds());
    let id = 1;
    while (used.has(id)) {
      id += 1;
    }
    return id;
  }
}
