import { describe, expect, it } from "vitest";

import { SseParser, recordFromFrame } from "../src/sse.js";

const RECORD = {
  seq: 4,
  session_id: "sess-1",
  timestamp: "2026-08-18T10:00:00Z",
  kind: "ExecutionDelta",
  payload: {},
};

function frameText(seq: number, data: string): string {
  return `id: ${seq}\nevent: trace\ndata: ${data}\n\n`;
}

describe("SseParser", () => {
  it("parses a whole frame", () => {
    const frames = new SseParser().push(frameText(4, JSON.stringify(RECORD)));
    expect(frames).toHaveLength(1);
    expect(frames[0]).toMatchObject({ id: "4", event: "trace" });
  });

  it("holds partial input until the frame completes", () => {
    const parser = new SseParser();
    const text = frameText(4, JSON.stringify(RECORD));
    const cut = Math.floor(text.length / 2);
    expect(parser.push(text.slice(0, cut))).toHaveLength(0);
    const frames = parser.push(text.slice(cut));
    expect(frames).toHaveLength(1);
    expect(JSON.parse(frames[0]!.data!)).toEqual(RECORD);
  });

  it("yields several frames from one chunk", () => {
    const chunk = frameText(1, "{}") + frameText(2, "{}") + frameText(3, "{}");
    expect(new SseParser().push(chunk).map((f) => f.id)).toEqual(["1", "2", "3"]);
  });

  it("joins multi-line data fields", () => {
    const frames = new SseParser().push("data: one\ndata: two\n\n");
    expect(frames[0]!.data).toBe("one\ntwo");
  });

  it("drops lines without a field separator", () => {
    const frames = new SseParser().push(": comment\ngarbage\ndata: ok\n\n");
    expect(frames).toHaveLength(1);
    expect(frames[0]!.data).toBe("ok");
  });
});

describe("recordFromFrame", () => {
  it("decodes trace frames", () => {
    const record = recordFromFrame({ id: "4", event: "trace", data: JSON.stringify(RECORD) });
    expect(record).toEqual(RECORD);
  });

  it("ignores non-trace events and dataless frames", () => {
    expect(recordFromFrame({ event: "ping", data: "{}" })).toBeNull();
    expect(recordFromFrame({ event: "trace" })).toBeNull();
  });
});
