import { TraceRecordWire } from "./wire.js";

// Verdict-ish color keys per record kind; StepVerdict cards refine the
// key from their decision payload.
const KIND_TONES: Record<string, string> = {
  GoalIntake: "neutral",
  ProfileBound: "neutral",
  PlanSubmitted: "neutral",
  StepFindings: "info",
  StepVerdict: "info",
  ElevationOpened: "elevate",
  ElevationDecided: "info",
  ElevationExpired: "deny",
  ExecutionDelta: "allow",
  ExecutionSkipped: "deny",
};

export function cardTone(record: TraceRecordWire): string {
  if (record.kind === "StepVerdict") {
    const decision = record.payload.decision;
    if (decision === "ALLOW") return "allow";
    if (decision === "ELEVATE") return "elevate";
    if (decision === "DENY") return "deny";
  }
  if (record.kind === "ElevationDecided") {
    return record.payload.state === "APPROVED" ? "allow" : "deny";
  }
  return KIND_TONES[record.kind] ?? "neutral";
}

export type TimelineFilter = { kind: string | null };

export class Timeline {
  private records: TraceRecordWire[] = [];
  private stale = false;
  sessionId: string | null = null;

  // Loading a trace response replaces everything; live events append.
  load(sessionId: string, records: TraceRecordWire[]): void {
    this.sessionId = sessionId;
    this.records = [...records].sort((a, b) => a.seq - b.seq);
    this.stale = false;
  }

  lastSeq(): number {
    const tail = this.records[this.records.length - 1];
    return tail ? tail.seq : -1;
  }

  needsReload(): boolean {
    return this.stale;
  }

  applyEvent(record: TraceRecordWire): boolean {
    if (this.sessionId === null || record.session_id !== this.sessionId) return false;
    const last = this.lastSeq();
    if (record.seq <= last) return false;
    if (record.seq !== last + 1) {
      // a gap means the stream skipped records; the next render should
      // refetch the trace rather than show a hole
      this.stale = true;
      return false;
    }
    this.records.push(record);
    return true;
  }

  // Cards are the trace in seq order, optionally narrowed by kind;
  // never reordered client-side.
  cards(filter: TimelineFilter = { kind: null }): TraceRecordWire[] {
    if (filter.kind === null) return [...this.records];
    return this.records.filter((r) => r.kind === filter.kind);
  }

  kinds(): string[] {
    return [...new Set(this.records.map((r) => r.kind))];
  }
}
