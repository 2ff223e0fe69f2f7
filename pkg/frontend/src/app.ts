/** DOM shell: poll loop, panel mounting, inbox cards, study controls.
 *
 * All rendering goes through the pure payload -> SVG functions; this module
 * only owns fetching, timers, and event handlers.
 */

import { ApiClient } from "./api.js";
import { addNote, findTrialRecord, isActive, activateStudy, stopStudy, setExcluded } from "./controls.js";
import { coerceValues, confirmTask, formFields } from "./inbox.js";
import { renderContours } from "./render/contours.js";
import { renderMarginals } from "./render/histograms.js";
import { renderHypervolumeTrace } from "./render/hvtrace.js";
import { renderScatter } from "./render/scatter.js";
import {
  DEFAULT_POLL_INTERVAL_MS,
  FreshnessState,
  initialFreshness,
  isStale,
  markSuccess,
} from "./staleness.js";
import type { DashboardPayload, InboxTask, RecordDoc } from "./types.js";
import { SUPPORTED_PAYLOAD_VERSION } from "./types.js";

const api = new ApiClient("");
let freshness: FreshnessState = initialFreshness(DEFAULT_POLL_INTERVAL_MS);
let umbrella: RecordDoc | null = null;
let lastPayload: DashboardPayload | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function notice(text: string, kind: "info" | "conflict" = "info"): void {
  const box = el("notices");
  const item = document.createElement("div");
  item.className = `notice ${kind}`;
  item.textContent = text;
  box.prepend(item);
  setTimeout(() => item.remove(), 8000);
}

async function resolveStudy(): Promise<RecordDoc | null> {
  const requested = new URLSearchParams(location.search).get("study");
  if (requested) return api.recordByIdentifier(requested);
  const studies = await api.studies();
  return studies[0] ?? null;
}

function renderDashboard(payload: DashboardPayload): void {
  if (payload.version !== SUPPORTED_PAYLOAD_VERSION) {
    el("scatter").innerHTML = "";
    notice(`unsupported payload version ${payload.version}`, "conflict");
    return;
  }
  lastPayload = payload;
  el("scatter").innerHTML = renderScatter(payload);
  el("marginals").innerHTML = renderMarginals(payload);
  el("hvtrace").innerHTML = renderHypervolumeTrace(payload);
  const objective = (el("contour-select") as HTMLSelectElement).value || undefined;
  el("contours").innerHTML = renderContours(payload, objective);
  renderTrialTable(payload);
}

function renderTrialTable(payload: DashboardPayload): void {
  const rows = payload.points
    .map((p) => {
      const cfg = p.config;
      const state = p.excluded ? "excluded" : p.pareto ? "pareto" : "";
      return (
        `<tr class="${state}">` +
        `<td>${p.batch}</td>` +
        `<td>${cfg.c_rate_charge?.toFixed(3)}</td>` +
        `<td>${cfg.c_rate_discharge?.toFixed(3)}</td>` +
        `<td>${cfg.repetitions}</td>` +
        `<td>${p.formation_time_h.toFixed(2)} ± ${p.formation_time_se_h.toFixed(2)}</td>` +
        `<td>${p.eol_cycles.toFixed(2)} ± ${p.eol_se_cycles.toFixed(2)}</td>` +
        `<td>${p.n_replicates}</td>` +
        `<td><button data-batch="${p.batch}" data-excluded="${p.excluded}" class="toggle-exclude">` +
        `${p.excluded ? "include" : "exclude"}</button>` +
        `<button data-batch="${p.batch}" class="add-note">note</button></td>` +
        `</tr>`
      );
    })
    .join("");
  el("trials").innerHTML =
    "<tr><th>batch</th><th>charge C</th><th>discharge C</th><th>reps</th>" +
    "<th>formation time [h]</th><th>EOL [cycles]</th><th>n</th><th></th></tr>" + rows;
}

function renderInbox(tasks: InboxTask[]): void {
  const box = el("inbox");
  if (tasks.length === 0) {
    box.innerHTML = '<p class="empty">no manual steps waiting</p>';
    return;
  }
  box.innerHTML = "";
  for (const task of tasks) {
    const card = document.createElement("div");
    card.className = "task-card";
    const title = document.createElement("h4");
    title.textContent = `${task.capability[0]} / ${task.capability[1]}`;
    card.appendChild(title);
    const meta = document.createElement("pre");
    meta.textContent = JSON.stringify(task.parameters, null, 1);
    card.appendChild(meta);

    const form = document.createElement("form");
    const fields = formFields(task.form_schema);
    for (const field of fields) {
      if (field.name === "confirmed") continue; // implied by submitting
      const label = document.createElement("label");
      label.textContent = `${field.name}${field.required ? " *" : ""}`;
      const input = document.createElement("input");
      input.name = field.name;
      input.type = field.type === "number" || field.type === "integer" ? "number" : "text";
      if (field.type === "number") input.step = "any";
      if (field.default !== undefined) input.value = String(field.default);
      label.appendChild(input);
      form.appendChild(label);
    }
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "confirm";
    form.appendChild(submit);
    const errorBox = document.createElement("div");
    errorBox.className = "field-errors";
    form.appendChild(errorBox);

    form.addEventListener("submit", async (event) => {
      event.preventDefault();
      const raw: Record<string, string> = {};
      new FormData(form).forEach((value, key) => {
        raw[key] = String(value);
      });
      const values = fields.length > 0 ? { confirmed: true, ...coerceValues(fields, raw) } : null;
      const outcome = await confirmTask(api, task, values);
      if (outcome.kind === "invalid") {
        errorBox.textContent = Object.entries(outcome.errors)
          .map(([name, message]) => `${name}: ${message}`)
          .join("; ");
        return;
      }
      if (outcome.kind === "conflict") {
        notice(outcome.notice, "conflict");
      } else if (outcome.kind === "error") {
        notice(outcome.notice, "conflict");
      } else {
        notice(`confirmed ${task.capability[0]} request`);
      }
      await poll(); // the card disappears on the next poll either way
    });
    card.appendChild(form);
    box.appendChild(card);
  }
}

async function poll(): Promise<void> {
  try {
    if (!umbrella) umbrella = await resolveStudy();
    if (!umbrella) {
      el("study-name").textContent = "no study defined yet";
      return;
    }
    el("study-name").textContent = umbrella.title;
    const [payload, tasks, status] = await Promise.all([
      api.dashboard(umbrella.identifier).catch(() => null),
      api.inbox(),
      api.orchestratorStatus(),
    ]);
    if (payload) {
      renderDashboard(payload);
    } else {
      el("scatter").innerHTML = '<p class="empty">no completed batches yet</p>';
    }
    renderInbox(tasks);
    el("workflows").textContent =
      `${status.active.length}/${status.max_parallel} workflow slots busy, ` +
      `${status.archived} finished`;
    umbrella = await api.recordByIdentifier(umbrella.identifier);
    (el("activate") as HTMLButtonElement).disabled = isActive(umbrella);
    freshness = markSuccess(freshness, Date.now());
  } catch (err) {
    console.error("poll failed", err);
  }
  el("stale-banner").style.display = isStale(freshness, Date.now()) ? "block" : "none";
}

function wireControls(): void {
  el("activate").addEventListener("click", async () => {
    if (umbrella) {
      await activateStudy(api, umbrella);
      notice("study activated");
      await poll();
    }
  });
  el("stop").addEventListener("click", async () => {
    if (umbrella) {
      await stopStudy(api, umbrella);
      notice("stop requested");
    }
  });
  el("contour-select").addEventListener("change", () => {
    if (lastPayload) renderDashboard(lastPayload);
  });
  el("trials").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    const batch = target.dataset.batch;
    if (batch === undefined || !umbrella) return;
    const record = await findTrialRecord(api, umbrella.identifier, Number(batch));
    if (!record) {
      notice(`no trial record for batch ${batch}`, "conflict");
      return;
    }
    if (target.classList.contains("toggle-exclude")) {
      const excluded = target.dataset.excluded === "true";
      await setExcluded(api, record.record_id, !excluded);
      notice(`batch ${batch} ${excluded ? "included" : "excluded"}; refit on next iteration`);
      await poll();
    } else if (target.classList.contains("add-note")) {
      const text = prompt(`note for batch ${batch}:`);
      if (text) {
        await addNote(api, record.record_id, text);
        notice("note added");
      }
    }
  });
}

export function start(): void {
  const select = el("contour-select") as HTMLSelectElement;
  for (const name of ["", "eol_cycles", "formation_time_h"]) {
    const option = document.createElement("option");
    option.value = name;
    option.textContent = name === "" ? "all objectives" : name;
    select.appendChild(option);
  }
  wireControls();
  void poll();
  setInterval(() => void poll(), DEFAULT_POLL_INTERVAL_MS);
}

start();
