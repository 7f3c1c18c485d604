import { GatewayClient, GatewayHttpError } from "./client.js";
import { PendingQueue } from "./queue.js";
import { ElevationWire } from "./wire.js";

export type DecisionInput = {
  approve: boolean;
  decidedBy: string;
  rationale: string;
};

// Mirrors the server's rules so a doomed request is never sent: denials
// carry a rationale, and every decision names its actor.
export function validateDecision(input: DecisionInput): string | null {
  if (input.decidedBy.trim() === "") {
    return "set a display name first; decisions are recorded with an actor";
  }
  if (!input.approve && input.rationale.trim() === "") {
    return "a denial needs a rationale";
  }
  return null;
}

export type DecisionOutcome =
  | { kind: "settled"; elevation: ElevationWire }
  | { kind: "blocked"; reason: string }
  | { kind: "superseded"; elevation: ElevationWire | null } // 409, someone else was first
  | { kind: "gone" } // 404, cleared from the queue
  | { kind: "failed"; reason: string };

export async function submitDecision(
  client: GatewayClient,
  queue: PendingQueue,
  elevationId: string,
  input: DecisionInput,
): Promise<DecisionOutcome> {
  const blocked = validateDecision(input);
  if (blocked !== null) return { kind: "blocked", reason: blocked };

  try {
    const elevation = await client.decide(elevationId, {
      approve: input.approve,
      decided_by: input.decidedBy,
      rationale: input.rationale,
    });
    queue.settle(elevation);
    return { kind: "settled", elevation };
  } catch (error) {
    if (error instanceof GatewayHttpError && error.status === 409) {
      // first decision wins; reload to show the settlement that beat us
      const settled = await reloadSettled(client, elevationId);
      if (settled) queue.settle(settled);
      return { kind: "superseded", elevation: settled };
    }
    if (error instanceof GatewayHttpError && error.status === 404) {
      const row = queue.get(elevationId);
      if (row) queue.settle(row.elevation);
      return { kind: "gone" };
    }
    const reason = error instanceof Error ? error.message : String(error);
    return { kind: "failed", reason };
  }
}

async function reloadSettled(
  client: GatewayClient,
  elevationId: string,
): Promise<ElevationWire | null> {
  try {
    const all = await client.listElevations("all");
    return all.find((e) => e.elevation_id === elevationId) ?? null;
  } catch {
    return null;
  }
}
