/**
 * Client-side form validation.
 *
 * Invariant: a strict subset of the server's validation — anything this
 * module accepts, the service accepts too. It exists only to give the user
 * immediate feedback; the server remains the authority and may reject for
 * reasons the client cannot know (e.g. no model loaded).
 */

import {
  ADMISSION_TYPES,
  QUERY_KINDS,
  SWEEP_AXES,
  type PatientForm,
  type SweepAxis,
  type ValidationIssue,
} from "./types";

export const MAX_SWEEP_POINTS = 200;
export const MAX_SEQUENCES = 1_000_000;
export const MAX_POSTERIOR_DRAWS = 10_000;

/** Which optional fields each query kind requires, mirroring the engine. */
export const KIND_REQUIREMENTS: Record<string, ReadonlyArray<"beta1" | "r1" | "tau_p" | "tau_m">> =
  {
    admission_risk: [],
    extended_stay_risk: ["beta1", "r1", "tau_p", "tau_m"],
    retest_now: ["beta1", "r1", "tau_p"],
    deisolation: ["beta1", "tau_p"],
  };

function isBit(v: unknown): v is number {
  return typeof v === "number" && (v === 0 || v === 1);
}

function isIntIn(v: unknown, lo: number, hi: number): v is number {
  return typeof v === "number" && Number.isInteger(v) && v >= lo && v <= hi;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

export function validateForm(form: PatientForm): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  const bad = (field: string, message: string) => issues.push({ field, message });

  if (!(QUERY_KINDS as readonly string[]).includes(form.kind)) {
    bad("kind", `must be one of ${QUERY_KINDS.join(", ")}`);
  }

  const a = form.alpha;
  if (!isBit(a.gender)) bad("alpha.gender", "must be 0 or 1");
  if (!isFiniteNumber(a.age_years) || a.age_years < 0 || a.age_years > 120) {
    bad("alpha.age_years", "must be between 0 and 120");
  }
  if (!(ADMISSION_TYPES as readonly string[]).includes(a.admission_type)) {
    bad("alpha.admission_type", `must be one of ${ADMISSION_TYPES.join(", ")}`);
  }
  for (const field of [
    "from_healthcare_facility",
    "cerebrovascular_history",
    "diabetes",
    "hospitalized_past_90d",
    "mrsa_positive_past_90d",
  ] as const) {
    if (!isBit(a[field])) bad(`alpha.${field}`, "must be 0 or 1");
  }

  if (form.beta1 !== null) {
    const b = form.beta1;
    if (!isIntIn(b.ab_days_30, 0, 30)) bad("beta1.ab_days_30", "must be an integer in 0..30");
    if (!isIntIn(b.icu_days_7, 0, 7)) bad("beta1.icu_days_7", "must be an integer in 0..7");
    if (!isBit(b.dialysis_7d)) bad("beta1.dialysis_7d", "must be 0 or 1");
  }
  if (form.r1 !== null && !isBit(form.r1)) bad("r1", "must be 0 or 1");
  if (form.tau_p !== null && (!isFiniteNumber(form.tau_p) || form.tau_p < 0)) {
    bad("tau_p", "must be a non-negative number of days");
  }
  if (form.tau_m !== null && (!isFiniteNumber(form.tau_m) || form.tau_m <= 0)) {
    bad("tau_m", "must be a positive number of days");
  }

  for (const field of KIND_REQUIREMENTS[form.kind] ?? []) {
    if (form[field] === null) bad(field, `${form.kind} requires ${field}`);
  }
  if (form.kind === "deisolation" && form.r1 !== null && form.r1 !== 0) {
    bad("r1", "deisolation assumes the prior test was negative (r1 must be 0 or omitted)");
  }

  if (!isIntIn(form.n_sequences, 1, MAX_SEQUENCES)) {
    bad("n_sequences", `must be an integer in 1..${MAX_SEQUENCES}`);
  }
  if (!isIntIn(form.n_posterior_draws, 1, MAX_POSTERIOR_DRAWS)) {
    bad("n_posterior_draws", `must be an integer in 1..${MAX_POSTERIOR_DRAWS}`);
  }
  if (form.seed !== null && !isIntIn(form.seed, 0, Number.MAX_SAFE_INTEGER)) {
    bad("seed", "must be a non-negative integer");
  }

  return issues;
}

export function validateSweep(
  form: PatientForm,
  axis: SweepAxis,
  grid: number[],
): ValidationIssue[] {
  const issues = validateForm(form);
  const bad = (field: string, message: string) => issues.push({ field, message });

  if (!(SWEEP_AXES as readonly string[]).includes(axis)) {
    bad("axis", `must be one of ${SWEEP_AXES.join(", ")}`);
  }
  if (grid.length === 0) bad("grid", "must be non-empty");
  if (grid.length > MAX_SWEEP_POINTS) {
    bad("grid", `too many points: ${grid.length} > ${MAX_SWEEP_POINTS}`);
  }
  for (const g of grid) {
    if (!isFiniteNumber(g) || (axis === "horizon" ? g <= 0 : g < 0)) {
      bad(
        "grid",
        axis === "horizon" ? "horizon values must be positive" : "delay values must be >= 0",
      );
      break;
    }
  }
  return issues;
}
