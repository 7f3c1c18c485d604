// Decoders for the gateway's wire protocol. Every payload the console
// renders passes through one of these first, so a malformed or drifting
// server response fails loudly at the boundary instead of leaking NaNs
// and undefineds into the view.

export class WireError extends Error {
  constructor(path: string, expected: string, got: unknown) {
    super(`${path}: expected ${expected}, got ${JSON.stringify(got)}`);
    this.name = "WireError";
  }
}

function asObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new WireError(path, "an object", value);
  }
  return value as Record<string, unknown>;
}

function asString(value: unknown, path: string): string {
  if (typeof value !== "string") throw new WireError(path, "a string", value);
  return value;
}

function asNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new WireError(path, "a finite number", value);
  }
  return value;
}

function asArray(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) throw new WireError(path, "an array", value);
  return value;
}

function optionalString(value: unknown, path: string): string | null {
  if (value === null || value === undefined) return null;
  return asString(value, path);
}

export type Severity = "LOW" | "MEDIUM" | "HIGH";
export type ElevationStateWire = "PENDING" | "APPROVED" | "DENIED" | "EXPIRED";

export type FindingWire = {
  rule_id: string;
  risk_class: string;
  severity: Severity;
  detail: string;
};

export type ExplanationWire = {
  rule_id: string;
  risk_class: string;
  severity: Severity;
  profile_field: string;
  field_value: string;
  mapped_verdict: string;
};

export type ElevationWire = {
  elevation_id: string;
  session_id: string;
  plan_id: string;
  step_index: number;
  findings: FindingWire[];
  explanation: ExplanationWire[];
  created_at: number;
  deadline: number;
  state: ElevationStateWire;
  decided_by: string | null;
  decision_rationale: string | null;
};

const ELEVATION_STATES: ElevationStateWire[] = ["PENDING", "APPROVED", "DENIED", "EXPIRED"];
const SEVERITIES: Severity[] = ["LOW", "MEDIUM", "HIGH"];

function decodeSeverity(value: unknown, path: string): Severity {
  const s = asString(value, path);
  if (!SEVERITIES.includes(s as Severity)) throw new WireError(path, "a severity", value);
  return s as Severity;
}

export function decodeFinding(value: unknown, path = "finding"): FindingWire {
  const o = asObject(value, path);
  return {
    rule_id: asString(o.rule_id, `${path}.rule_id`),
    risk_class: asString(o.risk_class, `${path}.risk_class`),
    severity: decodeSeverity(o.severity, `${path}.severity`),
    detail: asString(o.detail, `${path}.detail`),
  };
}

export function decodeExplanation(value: unknown, path = "explanation"): ExplanationWire {
  const o = asObject(value, path);
  return {
    rule_id: asString(o.rule_id, `${path}.rule_id`),
    risk_class: asString(o.risk_class, `${path}.risk_class`),
    severity: decodeSeverity(o.severity, `${path}.severity`),
    profile_field: asString(o.profile_field, `${path}.profile_field`),
    field_value: asString(o.field_value, `${path}.field_value`),
    mapped_verdict: asString(o.mapped_verdict, `${path}.mapped_verdict`),
  };
}

export function decodeElevation(value: unknown, path = "elevation"): ElevationWire {
  const o = asObject(value, path);
  const state = asString(o.state, `${path}.state`);
  if (!ELEVATION_STATES.includes(state as ElevationStateWire)) {
    throw new WireError(`${path}.state`, "an elevation state", state);
  }
  return {
    elevation_id: asString(o.elevation_id, `${path}.elevation_id`),
    session_id: asString(o.session_id, `${path}.session_id`),
    plan_id: asString(o.plan_id, `${path}.plan_id`),
    step_index: asNumber(o.step_index, `${path}.step_index`),
    findings: asArray(o.findings, `${path}.findings`).map((f, i) =>
      decodeFinding(f, `${path}.findings[${i}]`),
    ),
    explanation: asArray(o.explanation, `${path}.explanation`).map((e, i) =>
      decodeExplanation(e, `${path}.explanation[${i}]`),
    ),
    created_at: asNumber(o.created_at, `${path}.created_at`),
    deadline: asNumber(o.deadline, `${path}.deadline`),
    state: state as ElevationStateWire,
    decided_by: optionalString(o.decided_by, `${path}.decided_by`),
    decision_rationale: optionalString(o.decision_rationale, `${path}.decision_rationale`),
  };
}

export type TraceRecordWire = {
  seq: number;
  session_id: string;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
};

export function decodeTraceRecord(value: unknown, path = "record"): TraceRecordWire {
  const o = asObject(value, path);
  return {
    seq: asNumber(o.seq, `${path}.seq`),
    session_id: asString(o.session_id, `${path}.session_id`),
    timestamp: asString(o.timestamp, `${path}.timestamp`),
    kind: asString(o.kind, `${path}.kind`),
    payload: asObject(o.payload, `${path}.payload`),
  };
}

export type ErrorWire = { code: string; message: string };

export function decodeErrorBody(value: unknown): ErrorWire {
  try {
    const o = asObject(value, "error");
    const e = asObject(o.error, "error.error");
    return { code: asString(e.code, "error.code"), message: asString(e.message, "error.message") };
  } catch {
    return { code: "UnknownError", message: "unrecognized error response" };
  }
}

// PlanSubmitted payloads carry the goal and raw step text that elevation
// rows reference only by plan_id/step_index.
export type PlanContext = { goal: string; steps: string[] };

export function planContextFromTrace(
  records: TraceRecordWire[],
  planId: string,
): PlanContext | null {
  for (const record of records) {
    if (record.kind !== "PlanSubmitted") continue;
    if (record.payload.plan_id !== planId) continue;
    const goal = typeof record.payload.goal === "string" ? record.payload.goal : "";
    const rawSteps = Array.isArray(record.payload.steps) ? record.payload.steps : [];
    const steps = rawSteps.map((s) =>
      typeof s === "object" && s !== null && typeof (s as Record<string, unknown>).raw === "string"
        ? ((s as Record<string, unknown>).raw as string)
        : "",
    );
    return { goal, steps };
  }
  return null;
}
