// Shared fakes for the unit suites: an in-memory fetch that answers from
// a route table and counts calls, plus wire-document builders.

import { GatewayClient } from "../src/client.js";
import { FetchLike } from "../src/client.js";
import { ElevationWire, TraceRecordWire } from "../src/wire.js";

export type RouteHandler = (init?: RequestInit) => { status: number; body: unknown };

export class FakeFetch {
  calls: string[] = [];
  private routes = new Map<string, RouteHandler>();

  // key is "METHOD path?query" with the base stripped
  on(key: string, handler: RouteHandler): void {
    this.routes.set(key, handler);
  }

  onJson(key: string, status: number, body: unknown): void {
    this.on(key, () => ({ status, body }));
  }

  fn(): FetchLike {
    return async (input, init) => {
      const method = init?.method ?? "GET";
      const path = input.replace(/^https?:\/\/[^/]+/, "");
      const key = `${method} ${path}`;
      this.calls.push(key);
      const handler = this.routes.get(key);
      if (!handler) throw new Error(`no fake route for ${key}`);
      const { status, body } = handler(init);
      return new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    };
  }

  client(base = "http://gateway.test"): GatewayClient {
    return new GatewayClient(base, this.fn());
  }
}

export function elevationDoc(overrides: Partial<ElevationWire> = {}): ElevationWire {
  return {
    elevation_id: "elev-1",
    session_id: "sess-1",
    plan_id: "plan-1",
    step_index: 0,
    findings: [
      {
        rule_id: "pkg.install",
        risk_class: "UNSAFE_DEPENDENCY_INTRODUCTION",
        severity: "MEDIUM",
        detail: "installs a package",
      },
    ],
    explanation: [
      {
        rule_id: "pkg.install",
        risk_class: "UNSAFE_DEPENDENCY_INTRODUCTION",
        severity: "MEDIUM",
        profile_field: "dependency_policy",
        field_value: "CONFIRM",
        mapped_verdict: "ELEVATE",
      },
    ],
    created_at: 1000.0,
    deadline: 1120.0,
    state: "PENDING",
    decided_by: null,
    decision_rationale: null,
    ...overrides,
  };
}

export function traceDoc(
  kind: string,
  payload: Record<string, unknown>,
  seq = 0,
  sessionId = "sess-1",
): TraceRecordWire {
  return { seq, session_id: sessionId, timestamp: "2026-08-18T10:00:00Z", kind, payload };
}
