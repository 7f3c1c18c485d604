import { GatewayClient } from "./client.js";
import {
  ElevationWire,
  PlanContext,
  TraceRecordWire,
  decodeElevation,
  planContextFromTrace,
} from "./wire.js";

export type QueueRow = {
  elevation: ElevationWire;
  // from the session trace's PlanSubmitted record, fetched lazily
  goal: string | null;
  stepRaw: string | null;
};

export function countdownSeconds(row: QueueRow, nowMs: number): number {
  // remaining time is always recomputed from the server-reported deadline;
  // a locally decremented counter would drift and lie near the cutoff
  return Math.max(0, row.elevation.deadline - nowMs / 1000);
}

export function severityBadges(row: QueueRow): { riskClass: string; severity: string }[] {
  const seen = new Set<string>();
  const badges: { riskClass: string; severity: string }[] = [];
  for (const finding of row.elevation.findings) {
    const key = `${finding.risk_class}:${finding.severity}`;
    if (seen.has(key)) continue;
    seen.add(key);
    badges.push({ riskClass: finding.risk_class, severity: finding.severity });
  }
  return badges;
}

export class PendingQueue {
  private rowsById = new Map<string, QueueRow>();
  private contexts = new Map<string, Promise<PlanContext | null>>();

  constructor(private readonly client: GatewayClient) {}

  rows(): QueueRow[] {
    const rows = [...this.rowsById.values()];
    rows.sort((a, b) =>
      a.elevation.deadline === b.elevation.deadline
        ? a.elevation.elevation_id.localeCompare(b.elevation.elevation_id)
        : a.elevation.deadline - b.elevation.deadline,
    );
    return rows;
  }

  get(elevationId: string): QueueRow | undefined {
    return this.rowsById.get(elevationId);
  }

  async refresh(): Promise<void> {
    const pending = await this.client.listElevations("pending");
    const fresh = new Map<string, QueueRow>();
    for (const elevation of pending) {
      const existing = this.rowsById.get(elevation.elevation_id);
      fresh.set(elevation.elevation_id, {
        elevation,
        goal: existing?.goal ?? null,
        stepRaw: existing?.stepRaw ?? null,
      });
    }
    this.rowsById = fresh;
    await Promise.all(this.rows().map((row) => this.ensureContext(row)));
  }

  // Elevation rows reference their step only by plan_id/step_index; the
  // goal excerpt and raw command come from the session trace. The cache
  // holds the in-flight promise, so a queue full of one plan costs one
  // request even when its rows enrich concurrently.
  private loadContext(sessionId: string, planId: string): Promise<PlanContext | null> {
    const key = `${sessionId}/${planId}`;
    let pending = this.contexts.get(key);
    if (!pending) {
      pending = this.client
        .trace(sessionId)
        .then((records) => planContextFromTrace(records, planId))
        .catch(() => {
          this.contexts.delete(key); // failed fetches retry on the next refresh
          return null;
        });
      this.contexts.set(key, pending);
    }
    return pending;
  }

  async ensureContext(row: QueueRow): Promise<void> {
    if (row.goal !== null && row.stepRaw !== null) return;
    const context = await this.loadContext(row.elevation.session_id, row.elevation.plan_id);
    if (context === null) return; // leave the row unenriched; ids are still shown
    row.goal = context.goal;
    row.stepRaw = context.steps[row.elevation.step_index] ?? null;
  }

  // Feed every live trace record through here; rows appear on
  // ElevationOpened and disappear as soon as any settlement arrives.
  applyEvent(record: TraceRecordWire): boolean {
    if (record.kind === "ElevationOpened") {
      const elevation = decodeElevation(record.payload, "event.payload");
      if (elevation.state !== "PENDING") return false;
      this.rowsById.set(elevation.elevation_id, { elevation, goal: null, stepRaw: null });
      return true;
    }
    if (record.kind === "ElevationDecided" || record.kind === "ElevationExpired") {
      const id = record.payload.elevation_id;
      if (typeof id === "string") return this.rowsById.delete(id);
    }
    return false;
  }

  settle(elevation: ElevationWire): void {
    this.rowsById.delete(elevation.elevation_id);
  }
}
