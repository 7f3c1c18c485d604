// Browser entry point. Everything testable lives in the other modules; this
// file only wires DOM nodes to them.

import { GatewayClient } from "./client.js";
import { submitDecision } from "./decisions.js";
import { PendingQueue } from "./queue.js";
import { renderQueue, renderTimeline } from "./render.js";
import { ConsoleSettings, loadSettings, saveSettings } from "./settings.js";
import { Timeline } from "./timeline.js";
import { EventFollower } from "./sse.js";

const DEFAULT_BASE = "http://127.0.0.1:8787";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  let settings: ConsoleSettings = loadSettings(window.localStorage, DEFAULT_BASE);
  let client = new GatewayClient(settings.gatewayBase, (input, init) => fetch(input, init));
  let queue = new PendingQueue(client);
  const timeline = new Timeline();

  const nameInput = el<HTMLInputElement>("display-name");
  const baseInput = el<HTMLInputElement>("gateway-base");
  const queueHost = el<HTMLDivElement>("queue");
  const queueStatus = el<HTMLSpanElement>("queue-status");
  const timelineHost = el<HTMLDivElement>("timeline");
  const timelineStatus = el<HTMLSpanElement>("timeline-status");
  const sessionInput = el<HTMLInputElement>("session-id");
  const kindFilter = el<HTMLSelectElement>("kind-filter");

  nameInput.value = settings.displayName;
  baseInput.value = settings.gatewayBase;

  function persistSettings(): void {
    settings = { displayName: nameInput.value.trim(), gatewayBase: baseInput.value.trim() || DEFAULT_BASE };
    saveSettings(window.localStorage, settings);
  }

  function drawQueue(): void {
    queueHost.innerHTML = renderQueue(queue.rows(), Date.now());
  }

  function drawTimeline(): void {
    const kind = kindFilter.value;
    const cards = timeline.cards({ kind: kind === "" ? null : kind });
    timelineHost.innerHTML = renderTimeline(cards);
    const stale = timeline.needsReload() ? " (stale, reload)" : "";
    timelineStatus.textContent = timeline.sessionId === null ? "" : `${timeline.sessionId}${stale}`;
    const current = new Set<string>();
    kindFilter.querySelectorAll("option").forEach((o) => current.add(o.value));
    for (const k of timeline.kinds()) {
      if (!current.has(k)) {
        const option = document.createElement("option");
        option.value = k;
        option.textContent = k;
        kindFilter.append(option);
      }
    }
  }

  async function reloadQueue(): Promise<void> {
    try {
      await queue.refresh();
      queueStatus.textContent = "";
    } catch (err) {
      queueStatus.textContent = `load failed: ${String(err)}`;
    }
    drawQueue();
  }

  async function reloadTimeline(): Promise<void> {
    const sessionId = sessionInput.value.trim();
    if (sessionId === "") return;
    try {
      const records = await client.trace(sessionId);
      timeline.load(sessionId, records);
      timelineStatus.textContent = sessionId;
    } catch (err) {
      timelineStatus.textContent = `load failed: ${String(err)}`;
    }
    drawTimeline();
    watchSession(sessionId);
  }

  // One follower across all sessions feeds the queue; a second, session-bound
  // one feeds the timeline so it can resume from the last seq it saw.
  let queueFollower: EventFollower;
  function watchQueue(): void {
    queueFollower = new EventFollower({
      base: settings.gatewayBase,
      onRecord: (record) => {
        queue.applyEvent(record);
        drawQueue();
      },
      onStatus: (state) => {
        queueStatus.textContent = state === "live" ? "" : state;
        if (state === "live") void reloadQueue();
      },
      fetchFn: (input, init) => fetch(input, init),
    });
    void queueFollower.run();
  }
  watchQueue();

  let timelineFollower: EventFollower | null = null;
  function watchSession(sessionId: string): void {
    if (timelineFollower !== null) timelineFollower.stop();
    timelineFollower = new EventFollower({
      base: settings.gatewayBase,
      sessionId,
      fromSeq: timeline.lastSeq() + 1,
      onRecord: (record) => {
        timeline.applyEvent(record);
        drawTimeline();
      },
      onStatus: (state) => {
        timelineStatus.textContent = state === "live" ? sessionId : `${sessionId} (${state})`;
      },
      fetchFn: (input, init) => fetch(input, init),
    });
    void timelineFollower.run();
  }

  queueHost.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const act = target.dataset["act"];
    const elevationId = target.dataset["elevation"];
    if (act === undefined || elevationId === undefined) return;
    const rationaleInput = queueHost.querySelector<HTMLInputElement>(
      `input.rationale[data-elevation="${elevationId}"]`,
    );
    const errorHost = queueHost.querySelector<HTMLSpanElement>(
      `span.decision-error[data-elevation="${elevationId}"]`,
    );
    void (async () => {
      const outcome = await submitDecision(client, queue, elevationId, {
        approve: act === "approve",
        decidedBy: settings.displayName,
        rationale: rationaleInput === null ? "" : rationaleInput.value,
      });
      if (outcome.kind === "blocked") {
        if (errorHost !== null) errorHost.textContent = outcome.reason;
        return;
      }
      if (outcome.kind === "failed") {
        if (errorHost !== null) errorHost.textContent = outcome.reason;
        return;
      }
      drawQueue();
    })();
  });

  el<HTMLFormElement>("settings-form").addEventListener("submit", (event) => {
    event.preventDefault();
    persistSettings();
    client = new GatewayClient(settings.gatewayBase, (input, init) => fetch(input, init));
    queue = new PendingQueue(client);
    queueFollower.stop();
    watchQueue();
    void reloadQueue();
  });

  el<HTMLFormElement>("timeline-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void reloadTimeline();
  });

  kindFilter.addEventListener("change", drawTimeline);

  window.setInterval(drawQueue, 1000);
  void reloadQueue();
}

main();
