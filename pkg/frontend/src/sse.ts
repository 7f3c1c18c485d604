// Event stream client built on fetch streaming rather than EventSource,
// so the exact resume query (from_seq) stays under our control and the
// same code runs in the browser and in node-side tests.

import { TraceRecordWire, decodeTraceRecord } from "./wire.js";
import { FetchLike } from "./client.js";

export type SseFrame = { id?: string; event?: string; data?: string };

// Incremental parser: feed it chunks, collect completed frames.
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    let split;
    while ((split = this.buffer.indexOf("\n\n")) !== -1) {
      const block = this.buffer.slice(0, split);
      this.buffer = this.buffer.slice(split + 2);
      const frame: SseFrame = {};
      for (const line of block.split("\n")) {
        const sep = line.indexOf(": ");
        if (sep === -1) continue;
        const field = line.slice(0, sep);
        const value = line.slice(sep + 2);
        if (field === "id") frame.id = value;
        else if (field === "event") frame.event = value;
        else if (field === "data") frame.data = frame.data ? frame.data + "\n" + value : value;
      }
      if (frame.id !== undefined || frame.event !== undefined || frame.data !== undefined) {
        frames.push(frame);
      }
    }
    return frames;
  }
}

export function recordFromFrame(frame: SseFrame): TraceRecordWire | null {
  if (frame.event !== "trace" || frame.data === undefined) return null;
  return decodeTraceRecord(JSON.parse(frame.data));
}

export type FollowerStatus = "connecting" | "live" | "degraded" | "stopped";

export type FollowerOptions = {
  base: string;
  sessionId?: string;
  // replay the session trace from this seq on first connect; resume is
  // always lastSeq + 1 afterwards (seq comes from the server, frame ids)
  fromSeq?: number;
  fetchFn?: FetchLike;
  onRecord: (record: TraceRecordWire) => void;
  onStatus?: (status: FollowerStatus) => void;
  retryDelayMs?: number;
};

export class EventFollower {
  lastSeq = -1;
  private stopped = false;
  private controller: AbortController | null = null;

  constructor(private readonly options: FollowerOptions) {
    if (options.fromSeq !== undefined) this.lastSeq = options.fromSeq - 1;
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.options.onStatus?.("stopped");
  }

  private streamUrl(): string {
    const params = new URLSearchParams();
    if (this.options.sessionId) {
      params.set("session_id", this.options.sessionId);
      params.set("from_seq", String(this.lastSeq + 1));
    }
    const query = params.toString();
    return this.options.base.replace(/\/$/, "") + "/v1/events" + (query ? `?${query}` : "");
  }

  // Runs until stop(); reconnects with seq-based resume after any drop.
  async run(): Promise<void> {
    const fetchFn = this.options.fetchFn ?? ((input: string, init?: RequestInit) => fetch(input, init));
    const retryDelay = this.options.retryDelayMs ?? 2000;
    while (!this.stopped) {
      this.options.onStatus?.("connecting");
      this.controller = new AbortController();
      try {
        const response = await fetchFn(this.streamUrl(), { signal: this.controller.signal });
        if (!response.ok || !response.body) throw new Error(`stream http ${response.status}`);
        this.options.onStatus?.("live");
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
            const record = recordFromFrame(frame);
            if (record === null) continue;
            if (this.options.sessionId && record.seq <= this.lastSeq) continue;
            this.lastSeq = Math.max(this.lastSeq, record.seq);
            this.options.onRecord(record);
          }
        }
      } catch {
        // fall through to the retry path; aborts land here too
      }
      if (this.stopped) break;
      this.options.onStatus?.("degraded");
      await new Promise((resolve) => setTimeout(resolve, retryDelay));
    }
  }
}
