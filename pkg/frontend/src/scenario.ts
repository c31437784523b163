/**
 * Saved what-if scenarios, persisted in localStorage only (no server state).
 *
 * A scenario card freezes the form, the server's answer, and the seed that
 * reproduces it, so two cards of the same kind can be compared side by side.
 */

import type { PatientForm, QueryResponse } from "./types";

const STORAGE_KEY = "genhai.scenarios.v1";

export interface ScenarioCard {
  id: string;
  name: string;
  createdAt: string;
  form: PatientForm;
  response: QueryResponse;
}

function readAll(): ScenarioCard[] {
  const raw = localStorage.getItem(STORAGE_KEY);
  if (!raw) return [];
  try {
    const parsed = JSON.parse(raw) as unknown;
    return Array.isArray(parsed) ? (parsed as ScenarioCard[]) : [];
  } catch {
    return [];
  }
}

function writeAll(cards: ScenarioCard[]): void {
  localStorage.setItem(STORAGE_KEY, JSON.stringify(cards));
}

export function listScenarios(): ScenarioCard[] {
  return readAll();
}

export function saveScenario(name: string, form: PatientForm, response: QueryResponse): ScenarioCard {
  const card: ScenarioCard = {
    id: `${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 8)}`,
    name,
    createdAt: new Date().toISOString(),
    form,
    response,
  };
  writeAll([...readAll(), card]);
  return card;
}

export function deleteScenario(id: string): void {
  writeAll(readAll().filter((c) => c.id !== id));
}

export function clearScenarios(): void {
  localStorage.removeItem(STORAGE_KEY);
}

export interface ScenarioComparison {
  a: ScenarioCard;
  b: ScenarioCard;
  /** Signed difference in the server-reported estimates (b minus a). */
  estimateDelta: number;
  /** Form fields that differ, with both values, for the "what changed" panel. */
  changes: Array<{ field: string; from: unknown; to: unknown }>;
}

function flatten(form: PatientForm): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const [k, v] of Object.entries(form)) {
    if (v !== null && typeof v === "object") {
      for (const [k2, v2] of Object.entries(v)) out[`${k}.${k2}`] = v2;
    } else {
      out[k] = v;
    }
  }
  return out;
}

/**
 * Compare two saved scenarios of the same query kind. The delta is a pure
 * subtraction of the two server estimates — no probability is computed here.
 */
export function compareScenarios(a: ScenarioCard, b: ScenarioCard): ScenarioComparison {
  if (a.form.kind !== b.form.kind) {
    throw new Error(
      `cannot compare scenarios of different kinds (${a.form.kind} vs ${b.form.kind})`,
    );
  }
  const fa = flatten(a.form);
  const fb = flatten(b.form);
  const changes: ScenarioComparison["changes"] = [];
  for (const key of new Set([...Object.keys(fa), ...Object.keys(fb)])) {
    if (fa[key] !== fb[key]) changes.push({ field: key, from: fa[key], to: fb[key] });
  }
  return {
    a,
    b,
    estimateDelta: b.response.estimate - a.response.estimate,
    changes,
  };
}
