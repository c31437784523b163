/**
 * What-if console entry point: wires the form, the API client, result
 * cards, sweep overlays, and saved scenarios together.
 */

import { ApiClient, ApiError } from "./api";
import { buildForm, readForm, toRequestBody } from "./form";
import { renderResultCard, renderSweepChart, type SweepSeries } from "./render";
import {
  compareScenarios,
  deleteScenario,
  listScenarios,
  saveScenario,
  type ScenarioCard,
} from "./scenario";
import type { PatientForm, SweepAxis, ValidationIssue } from "./types";
import { validateForm, validateSweep } from "./validate";

const api = new ApiClient(import.meta.env.VITE_API_BASE ?? "");

function showIssues(target: HTMLElement, issues: ValidationIssue[]): void {
  target.replaceChildren();
  const list = document.createElement("ul");
  list.className = "issues";
  for (const issue of issues) {
    const li = document.createElement("li");
    li.textContent = `${issue.field}: ${issue.message}`;
    list.appendChild(li);
  }
  target.appendChild(list);
}

function showError(target: HTMLElement, err: unknown): void {
  if (err instanceof ApiError && err.issues.length > 0) {
    showIssues(target, err.issues);
    return;
  }
  target.replaceChildren();
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = err instanceof Error ? err.message : String(err);
  target.appendChild(p);
}

function sweepGrid(axis: SweepAxis): number[] {
  const n = 15;
  const hi = axis === "horizon" ? 21 : 14;
  const lo = axis === "horizon" ? 1 : 0;
  return Array.from({ length: n }, (_, i) => lo + ((hi - lo) * i) / (n - 1));
}

function renderScenarioList(panel: HTMLElement, output: HTMLElement): void {
  panel.replaceChildren();
  const cards = listScenarios();
  for (const card of cards) {
    const row = document.createElement("div");
    row.className = "scenario-row";
    const label = document.createElement("span");
    label.textContent = `${card.name} (${card.form.kind}, estimate ${card.response.estimate.toFixed(4)})`;
    row.appendChild(label);
    const del = document.createElement("button");
    del.textContent = "delete";
    del.addEventListener("click", () => {
      deleteScenario(card.id);
      renderScenarioList(panel, output);
    });
    row.appendChild(del);
    panel.appendChild(row);
  }
  if (cards.length >= 2) {
    const compare = document.createElement("button");
    compare.textContent = "Compare last two of same kind";
    compare.addEventListener("click", () => {
      const byKind = new Map<string, ScenarioCard[]>();
      for (const c of cards) {
        byKind.set(c.form.kind, [...(byKind.get(c.form.kind) ?? []), c]);
      }
      for (const group of byKind.values()) {
        if (group.length >= 2) {
          const cmp = compareScenarios(group[group.length - 2]!, group[group.length - 1]!);
          const p = document.createElement("p");
          p.className = "comparison";
          const changed = cmp.changes.map((c) => `${c.field}: ${c.from} → ${c.to}`).join("; ");
          p.textContent = `Δ estimate ${(cmp.estimateDelta * 100).toFixed(1)}pp — changed: ${changed || "nothing"}`;
          output.prepend(p);
          return;
        }
      }
    });
    panel.appendChild(compare);
  }
}

export function mountApp(root: HTMLElement): void {
  root.replaceChildren();
  const title = document.createElement("h1");
  title.textContent = "MRSA what-if console";
  root.appendChild(title);

  const formHost = document.createElement("div");
  const controls = document.createElement("div");
  controls.className = "controls";
  const output = document.createElement("div");
  output.id = "output";
  const scenarioPanel = document.createElement("div");
  scenarioPanel.id = "scenarios";
  root.append(formHost, controls, output, scenarioPanel);

  buildForm(formHost);

  const runBtn = document.createElement("button");
  runBtn.id = "run";
  runBtn.textContent = "Run query";
  runBtn.addEventListener("click", async () => {
    const form = readForm(formHost);
    const issues = validateForm(form);
    if (issues.length > 0) {
      showIssues(output, issues);
      return;
    }
    try {
      const res = await api.query(toRequestBody(form));
      output.replaceChildren(renderResultCard(form.kind, res));
      const save = document.createElement("button");
      save.id = "save-scenario";
      save.textContent = "Save scenario";
      save.addEventListener("click", () => {
        saveScenario(`scenario ${listScenarios().length + 1}`, form, res);
        renderScenarioList(scenarioPanel, output);
      });
      output.appendChild(save);
    } catch (err) {
      showError(output, err);
    }
  });
  controls.appendChild(runBtn);

  const sweepBtn = document.createElement("button");
  sweepBtn.id = "sweep";
  sweepBtn.textContent = "Sweep horizon";
  sweepBtn.addEventListener("click", async () => {
    const form = readForm(formHost);
    const axis: SweepAxis = form.kind === "extended_stay_risk" ? "horizon" : "delay";
    const grid = sweepGrid(axis);
    const issues = validateSweep(form, axis, grid);
    if (issues.length > 0) {
      showIssues(output, issues);
      return;
    }
    try {
      const res = await api.sweep({ ...toRequestBody(form), axis, grid });
      output.replaceChildren(
        renderSweepChart(axis === "horizon" ? "horizon (days)" : "delay (days)", [
          { label: form.kind, points: res.points, color: "#1f6feb" },
        ]),
      );
    } catch (err) {
      showError(output, err);
    }
  });
  controls.appendChild(sweepBtn);

  const overlayBtn = document.createElement("button");
  overlayBtn.id = "hcf-overlay";
  overlayBtn.textContent = "Overlay: healthcare-facility admission vs not";
  overlayBtn.addEventListener("click", async () => {
    const base = readForm(formHost);
    const axis: SweepAxis = base.kind === "extended_stay_risk" ? "horizon" : "delay";
    const grid = sweepGrid(axis);
    const issues = validateSweep(base, axis, grid);
    if (issues.length > 0) {
      showIssues(output, issues);
      return;
    }
    try {
      const series = await hcfOverlaySeries(api, base, axis, grid);
      output.replaceChildren(
        renderSweepChart(axis === "horizon" ? "horizon (days)" : "delay (days)", series),
      );
    } catch (err) {
      showError(output, err);
    }
  });
  controls.appendChild(overlayBtn);

  renderScenarioList(scenarioPanel, output);
}

/**
 * Two sweeps differing only in the admitted-from-healthcare-facility flag,
 * on a shared seed so the curves are comparable.
 */
export async function hcfOverlaySeries(
  client: ApiClient,
  base: PatientForm,
  axis: SweepAxis,
  grid: number[],
): Promise<SweepSeries[]> {
  const seed = base.seed ?? Math.floor(Math.random() * 2 ** 31);
  const variant = (hcf: number) => ({
    ...toRequestBody({ ...base, alpha: { ...base.alpha, from_healthcare_facility: hcf } }),
    axis,
    grid,
    seed,
  });
  const [without, withHcf] = await Promise.all([
    client.sweep(variant(0)),
    client.sweep(variant(1)),
  ]);
  return [
    { label: "community admission", points: without.points, color: "#1f6feb" },
    { label: "from healthcare facility", points: withHcf.points, color: "#d1242f" },
  ];
}

const rootEl = document.getElementById("app");
if (rootEl) mountApp(rootEl);
