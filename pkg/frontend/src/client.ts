import {
  ElevationWire,
  TraceRecordWire,
  decodeElevation,
  decodeErrorBody,
  decodeTraceRecord,
} from "./wire.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayHttpError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "GatewayHttpError";
  }
}

async function raise(response: Response): Promise<never> {
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error bodies fall through to the generic code
  }
  const error = decodeErrorBody(body);
  throw new GatewayHttpError(response.status, error.code, error.message);
}

export class GatewayClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async listElevations(
    status: "pending" | "all",
    sessionId?: string,
  ): Promise<ElevationWire[]> {
    const params = new URLSearchParams({ status });
    if (sessionId) params.set("session_id", sessionId);
    const response = await this.fetchFn(this.url(`/v1/elevations?${params}`));
    if (!response.ok) await raise(response);
    const body = (await response.json()) as { elevations?: unknown[] };
    return (body.elevations ?? []).map((e, i) => decodeElevation(e, `elevations[${i}]`));
  }

  async decide(
    elevationId: string,
    decision: { approve: boolean; decided_by: string; rationale?: string },
  ): Promise<ElevationWire> {
    const response = await this.fetchFn(this.url(`/v1/elevations/${elevationId}/decision`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(decision),
    });
    if (!response.ok) await raise(response);
    return decodeElevation(await response.json());
  }

  async trace(sessionId: string): Promise<TraceRecordWire[]> {
    const response = await this.fetchFn(this.url(`/v1/sessions/${sessionId}/trace`));
    if (!response.ok) await raise(response);
    const body = (await response.json()) as { records?: unknown[] };
    return (body.records ?? []).map((r, i) => decodeTraceRecord(r, `records[${i}]`));
  }
}
