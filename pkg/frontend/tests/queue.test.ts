import { describe, expect, it } from "vitest";

import { PendingQueue, countdownSeconds, severityBadges } from "../src/queue.js";
import { FakeFetch, elevationDoc, traceDoc } from "./helpers.js";

function rowFor(overrides: Parameters<typeof elevationDoc>[0] = {}) {
  return { elevation: elevationDoc(overrides), goal: null, stepRaw: null };
}

describe("countdownSeconds", () => {
  it("counts down from the server deadline", () => {
    const row = rowFor({ deadline: 1120 });
    expect(countdownSeconds(row, 1_000_000)).toBe(120);
    expect(countdownSeconds(row, 1_090_000)).toBe(30);
  });

  it("clamps at zero after the deadline", () => {
    expect(countdownSeconds(rowFor({ deadline: 1120 }), 2_000_000)).toBe(0);
  });
});

describe("severityBadges", () => {
  it("dedupes repeated class and severity pairs", () => {
    const f = elevationDoc().findings[0]!;
    const row = rowFor({
      findings: [f, { ...f, detail: "again" }, { ...f, severity: "HIGH" }],
    });
    expect(severityBadges(row)).toEqual([
      { riskClass: f.risk_class, severity: "MEDIUM" },
      { riskClass: f.risk_class, severity: "HIGH" },
    ]);
  });
});

function pendingBody(...elevations: unknown[]) {
  return { elevations };
}

describe("PendingQueue.refresh", () => {
  it("loads pending rows and enriches them from the session trace", async () => {
    const fake = new FakeFetch();
    fake.onJson(
      "GET /v1/elevations?status=pending",
      200,
      pendingBody(elevationDoc({ elevation_id: "e1", step_index: 1 })),
    );
    fake.onJson("GET /v1/sessions/sess-1/trace", 200, {
      session_id: "sess-1",
      records: [
        traceDoc("PlanSubmitted", {
          plan_id: "plan-1",
          goal: "tool setup",
          steps: [{ raw: "ls" }, { raw: "pip install requests" }],
        }),
      ],
    });

    const queue = new PendingQueue(fake.client());
    await queue.refresh();
    const rows = queue.rows();
    expect(rows).toHaveLength(1);
    expect(rows[0]!.goal).toBe("tool setup");
    expect(rows[0]!.stepRaw).toBe("pip install requests");
  });

  it("caches the trace per plan across refreshes", async () => {
    const fake = new FakeFetch();
    fake.onJson(
      "GET /v1/elevations?status=pending",
      200,
      pendingBody(
        elevationDoc({ elevation_id: "e1", step_index: 0 }),
        elevationDoc({ elevation_id: "e2", step_index: 1 }),
      ),
    );
    fake.onJson("GET /v1/sessions/sess-1/trace", 200, {
      records: [
        traceDoc("PlanSubmitted", { plan_id: "plan-1", goal: "g", steps: [{ raw: "a" }, { raw: "b" }] }),
      ],
    });
    const queue = new PendingQueue(fake.client());
    await queue.refresh();
    await queue.refresh();
    const traceCalls = fake.calls.filter((c) => c.includes("/trace"));
    expect(traceCalls).toHaveLength(1);
  });

  it("keeps rows usable when the trace fetch fails", async () => {
    const fake = new FakeFetch();
    fake.onJson("GET /v1/elevations?status=pending", 200, pendingBody(elevationDoc()));
    fake.onJson("GET /v1/sessions/sess-1/trace", 500, { error: { code: "Boom", message: "x" } });
    const queue = new PendingQueue(fake.client());
    await queue.refresh();
    expect(queue.rows()[0]!.stepRaw).toBeNull();
  });

  it("drops rows the server no longer lists", async () => {
    const fake = new FakeFetch();
    let listing = pendingBody(elevationDoc({ elevation_id: "e1" }), elevationDoc({ elevation_id: "e2" }));
    fake.on("GET /v1/elevations?status=pending", () => ({ status: 200, body: listing }));
    fake.onJson("GET /v1/sessions/sess-1/trace", 200, { records: [] });
    const queue = new PendingQueue(fake.client());
    await queue.refresh();
    expect(queue.rows()).toHaveLength(2);

    listing = pendingBody(elevationDoc({ elevation_id: "e2" }));
    await queue.refresh();
    expect(queue.rows().map((r) => r.elevation.elevation_id)).toEqual(["e2"]);
  });
});

describe("PendingQueue ordering", () => {
  it("sorts by deadline, then elevation id", async () => {
    const fake = new FakeFetch();
    fake.onJson(
      "GET /v1/elevations?status=pending",
      200,
      pendingBody(
        elevationDoc({ elevation_id: "late", deadline: 2000 }),
        elevationDoc({ elevation_id: "b-soon", deadline: 1100 }),
        elevationDoc({ elevation_id: "a-soon", deadline: 1100 }),
      ),
    );
    fake.onJson("GET /v1/sessions/sess-1/trace", 200, { records: [] });
    const queue = new PendingQueue(fake.client());
    await queue.refresh();
    expect(queue.rows().map((r) => r.elevation.elevation_id)).toEqual(["a-soon", "b-soon", "late"]);
  });
});

describe("PendingQueue.applyEvent", () => {
  it("adds a row on ElevationOpened", () => {
    const queue = new PendingQueue(new FakeFetch().client());
    const added = queue.applyEvent(
      traceDoc("ElevationOpened", elevationDoc({ elevation_id: "e9" }) as never),
    );
    expect(added).toBe(true);
    expect(queue.get("e9")).toBeDefined();
  });

  it("removes the row on ElevationDecided and ElevationExpired", () => {
    const queue = new PendingQueue(new FakeFetch().client());
    queue.applyEvent(traceDoc("ElevationOpened", elevationDoc({ elevation_id: "e1" }) as never));
    queue.applyEvent(traceDoc("ElevationOpened", elevationDoc({ elevation_id: "e2" }) as never));

    expect(queue.applyEvent(traceDoc("ElevationDecided", { elevation_id: "e1", state: "APPROVED" }))).toBe(true);
    expect(queue.applyEvent(traceDoc("ElevationExpired", { elevation_id: "e2" }))).toBe(true);
    expect(queue.rows()).toHaveLength(0);
  });

  it("ignores unrelated kinds and unknown settlements", () => {
    const queue = new PendingQueue(new FakeFetch().client());
    expect(queue.applyEvent(traceDoc("ExecutionDelta", {}))).toBe(false);
    expect(queue.applyEvent(traceDoc("ElevationDecided", { elevation_id: "ghost" }))).toBe(false);
  });
});
