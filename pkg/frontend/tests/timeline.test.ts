import { describe, expect, it } from "vitest";

import { Timeline, cardTone } from "../src/timeline.js";
import { traceDoc } from "./helpers.js";

function loaded(seqs: number[]): Timeline {
  const timeline = new Timeline();
  timeline.load(
    "sess-1",
    seqs.map((seq) => traceDoc("StepFindings", {}, seq)),
  );
  return timeline;
}

describe("Timeline.load", () => {
  it("sorts records by seq regardless of arrival order", () => {
    const timeline = new Timeline();
    timeline.load("sess-1", [
      traceDoc("PlanSubmitted", {}, 2),
      traceDoc("GoalIntake", {}, 0),
      traceDoc("ProfileBound", {}, 1),
    ]);
    expect(timeline.cards().map((r) => r.seq)).toEqual([0, 1, 2]);
    expect(timeline.lastSeq()).toBe(2);
  });

  it("starts empty with lastSeq -1", () => {
    const timeline = new Timeline();
    expect(timeline.lastSeq()).toBe(-1);
    expect(timeline.cards()).toEqual([]);
  });
});

describe("Timeline.applyEvent", () => {
  it("appends the next contiguous seq", () => {
    const timeline = loaded([0, 1]);
    expect(timeline.applyEvent(traceDoc("StepVerdict", {}, 2))).toBe(true);
    expect(timeline.lastSeq()).toBe(2);
    expect(timeline.needsReload()).toBe(false);
  });

  it("flags a gap as stale instead of inserting a hole", () => {
    const timeline = loaded([0, 1]);
    expect(timeline.applyEvent(traceDoc("StepVerdict", {}, 5))).toBe(false);
    expect(timeline.needsReload()).toBe(true);
    expect(timeline.lastSeq()).toBe(1);
  });

  it("ignores other sessions and already-seen seqs", () => {
    const timeline = loaded([0, 1]);
    expect(timeline.applyEvent(traceDoc("StepVerdict", {}, 2, "other-session"))).toBe(false);
    expect(timeline.applyEvent(traceDoc("StepVerdict", {}, 1))).toBe(false);
    expect(timeline.lastSeq()).toBe(1);
  });

  it("reload clears the stale flag", () => {
    const timeline = loaded([0]);
    timeline.applyEvent(traceDoc("StepVerdict", {}, 9));
    expect(timeline.needsReload()).toBe(true);
    timeline.load("sess-1", [traceDoc("GoalIntake", {}, 0), traceDoc("StepVerdict", {}, 1)]);
    expect(timeline.needsReload()).toBe(false);
  });
});

describe("Timeline.cards filtering", () => {
  it("narrows by kind without reordering", () => {
    const timeline = new Timeline();
    timeline.load("sess-1", [
      traceDoc("GoalIntake", {}, 0),
      traceDoc("StepVerdict", {}, 1),
      traceDoc("StepVerdict", {}, 2),
    ]);
    expect(timeline.cards({ kind: "StepVerdict" }).map((r) => r.seq)).toEqual([1, 2]);
    expect(timeline.kinds()).toEqual(["GoalIntake", "StepVerdict"]);
  });
});

describe("cardTone", () => {
  it.each([
    ["GoalIntake", {}, "neutral"],
    ["ElevationOpened", {}, "elevate"],
    ["ElevationExpired", {}, "deny"],
    ["ExecutionDelta", {}, "allow"],
    ["ExecutionSkipped", {}, "deny"],
    ["SomethingNew", {}, "neutral"],
    ["StepVerdict", { decision: "ALLOW" }, "allow"],
    ["StepVerdict", { decision: "ELEVATE" }, "elevate"],
    ["StepVerdict", { decision: "DENY" }, "deny"],
    ["ElevationDecided", { state: "APPROVED" }, "allow"],
    ["ElevationDecided", { state: "DENIED" }, "deny"],
  ])("%s %j renders %s", (kind, payload, tone) => {
    expect(cardTone(traceDoc(kind, payload as Record<string, unknown>))).toBe(tone);
  });
});
