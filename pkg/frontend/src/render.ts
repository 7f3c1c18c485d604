import { QueueRow, countdownSeconds, severityBadges } from "./queue.js";
import { cardTone } from "./timeline.js";
import { TraceRecordWire } from "./wire.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatCountdown(seconds: number): string {
  if (seconds <= 0) return "expired";
  const m = Math.floor(seconds / 60);
  const s = Math.floor(seconds % 60);
  return m > 0 ? `${m}m ${s.toString().padStart(2, "0")}s` : `${s}s`;
}

export function renderQueueRow(row: QueueRow, nowMs: number): string {
  const e = row.elevation;
  const badges = severityBadges(row)
    .map(
      (b) =>
        `<span class="badge badge-${b.severity.toLowerCase()}">${esc(b.riskClass)} ${b.severity}</span>`,
    )
    .join(" ");
  const explanation = e.explanation
    .map(
      (x) =>
        `<li><code>${esc(x.rule_id)}</code> maps to ${esc(x.mapped_verdict)} because ` +
        `<code>${esc(x.profile_field)}</code> is ${esc(x.field_value)}</li>`,
    )
    .join("");
  const findings = e.findings
    .map((f) => `<li>${esc(f.detail)} <code>(${esc(f.rule_id)})</code></li>`)
    .join("");
  const remaining = countdownSeconds(row, nowMs);
  const goal = row.goal === null ? "" : `<div class="goal">${esc(truncate(row.goal, 120))}</div>`;
  const step =
    row.stepRaw === null
      ? `<code>plan ${esc(e.plan_id)} step ${e.step_index}</code>`
      : `<code>${esc(row.stepRaw)}</code>`;
  return `
<article class="pending-row" data-elevation="${esc(e.elevation_id)}">
  <header>
    ${step}
    <span class="countdown ${remaining <= 0 ? "countdown-expired" : ""}">${formatCountdown(remaining)}</span>
  </header>
  ${goal}
  <div class="badges">${badges}</div>
  <ul class="findings">${findings}</ul>
  <ul class="explanation">${explanation}</ul>
  <div class="decision-controls">
    <button class="approve" data-act="approve" data-elevation="${esc(e.elevation_id)}">Approve</button>
    <button class="deny" data-act="deny" data-elevation="${esc(e.elevation_id)}">Deny</button>
    <input type="text" class="rationale" placeholder="rationale (required to deny)"
           data-elevation="${esc(e.elevation_id)}">
    <span class="decision-error" data-elevation="${esc(e.elevation_id)}"></span>
  </div>
</article>`;
}

export function renderQueue(rows: QueueRow[], nowMs: number): string {
  if (rows.length === 0) {
    return `<div class="empty-state">Nothing is waiting on you.</div>`;
  }
  return rows.map((row) => renderQueueRow(row, nowMs)).join("\n");
}

export function renderTraceCard(record: TraceRecordWire): string {
  const tone = cardTone(record);
  const payload = esc(JSON.stringify(record.payload, null, 1));
  return `
<article class="trace-card tone-${tone}">
  <header><span class="seq">#${record.seq}</span> <strong>${esc(record.kind)}</strong>
    <time>${esc(record.timestamp)}</time></header>
  <pre>${payload}</pre>
</article>`;
}

export function renderTimeline(records: TraceRecordWire[]): string {
  if (records.length === 0) return `<div class="empty-state">No records.</div>`;
  return records.map(renderTraceCard).join("\n");
}

function truncate(text: string, max: number): string {
  return text.length <= max ? text : text.slice(0, max - 1) + "…";
}
