/**
 * The patient/what-if form: builds the inputs and reads them back into a
 * PatientForm. Parsing is lenient (blank optional fields become null);
 * validation lives in validate.ts.
 */

import { ADMISSION_TYPES, QUERY_KINDS, type PatientForm, type QueryKind } from "./types";

const BINARY_FIELDS = [
  ["gender", "Male sex"],
  ["from_healthcare_facility", "Admitted from healthcare facility"],
  ["cerebrovascular_history", "Cerebrovascular history"],
  ["diabetes", "Diabetes"],
  ["hospitalized_past_90d", "Hospitalized in past 90 days"],
  ["mrsa_positive_past_90d", "MRSA-positive in past 90 days"],
] as const;

function field(label: string, input: HTMLElement): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "field";
  const span = document.createElement("span");
  span.textContent = label;
  wrap.appendChild(span);
  wrap.appendChild(input);
  return wrap;
}

function numberInput(id: string, value: string, step = "1"): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "number";
  input.id = id;
  input.step = step;
  input.value = value;
  return input;
}

function checkbox(id: string): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "checkbox";
  input.id = id;
  return input;
}

function select(id: string, options: readonly string[]): HTMLSelectElement {
  const sel = document.createElement("select");
  sel.id = id;
  for (const opt of options) {
    const o = document.createElement("option");
    o.value = opt;
    o.textContent = opt;
    sel.appendChild(o);
  }
  return sel;
}

export function buildForm(root: HTMLElement): void {
  const form = document.createElement("form");
  form.id = "whatif-form";
  form.addEventListener("submit", (e) => e.preventDefault());

  form.appendChild(field("Question", select("kind", QUERY_KINDS)));

  const alphaSection = document.createElement("fieldset");
  alphaSection.id = "alpha-section";
  const alphaLegend = document.createElement("legend");
  alphaLegend.textContent = "Admission covariates";
  alphaSection.appendChild(alphaLegend);
  alphaSection.appendChild(field("Age (years)", numberInput("age_years", "65", "any")));
  alphaSection.appendChild(field("Admission type", select("admission_type", ADMISSION_TYPES)));
  for (const [id, label] of BINARY_FIELDS) {
    alphaSection.appendChild(field(label, checkbox(id)));
  }
  form.appendChild(alphaSection);

  const betaSection = document.createElement("fieldset");
  betaSection.id = "beta-section";
  const betaLegend = document.createElement("legend");
  betaLegend.textContent = "State at the most recent test";
  betaSection.appendChild(betaLegend);
  betaSection.appendChild(field("Antibiotic days (last 30)", numberInput("ab_days_30", "0")));
  betaSection.appendChild(field("ICU days (last 7)", numberInput("icu_days_7", "0")));
  betaSection.appendChild(field("Dialysis in last 7 days", checkbox("dialysis_7d")));
  betaSection.appendChild(field("Last result positive", checkbox("r1")));
  betaSection.appendChild(field("Days since last test (tau_p)", numberInput("tau_p", "1", "any")));
  betaSection.appendChild(field("Horizon in days (tau_m)", numberInput("tau_m", "7", "any")));
  form.appendChild(betaSection);

  const mcSection = document.createElement("fieldset");
  const mcLegend = document.createElement("legend");
  mcLegend.textContent = "Monte Carlo settings";
  mcSection.appendChild(mcLegend);
  mcSection.appendChild(field("Sequences", numberInput("n_sequences", "10000")));
  mcSection.appendChild(field("Posterior draws", numberInput("n_posterior_draws", "50")));
  mcSection.appendChild(field("Seed (blank = server picks)", numberInput("seed", "")));
  form.appendChild(mcSection);

  root.appendChild(form);
}

function num(root: ParentNode, id: string): number {
  const el = root.querySelector<HTMLInputElement>(`#${id}`);
  return el && el.value !== "" ? Number(el.value) : NaN;
}

function optional(root: ParentNode, id: string): number | null {
  const el = root.querySelector<HTMLInputElement>(`#${id}`);
  return el && el.value !== "" ? Number(el.value) : null;
}

function bit(root: ParentNode, id: string): number {
  return root.querySelector<HTMLInputElement>(`#${id}`)?.checked ? 1 : 0;
}

/** Kinds that condition on a prior test and therefore need the beta block. */
function needsBeta(kind: QueryKind): boolean {
  return kind !== "admission_risk";
}

export function readForm(root: ParentNode): PatientForm {
  const kind = root.querySelector<HTMLSelectElement>("#kind")!.value as QueryKind;
  return {
    kind,
    alpha: {
      gender: bit(root, "gender"),
      age_years: num(root, "age_years"),
      admission_type: root.querySelector<HTMLSelectElement>("#admission_type")!
        .value as PatientForm["alpha"]["admission_type"],
      from_healthcare_facility: bit(root, "from_healthcare_facility"),
      cerebrovascular_history: bit(root, "cerebrovascular_history"),
      diabetes: bit(root, "diabetes"),
      hospitalized_past_90d: bit(root, "hospitalized_past_90d"),
      mrsa_positive_past_90d: bit(root, "mrsa_positive_past_90d"),
    },
    beta1: needsBeta(kind)
      ? {
          ab_days_30: num(root, "ab_days_30"),
          icu_days_7: num(root, "icu_days_7"),
          dialysis_7d: bit(root, "dialysis_7d"),
        }
      : null,
    r1: kind === "extended_stay_risk" || kind === "retest_now" ? bit(root, "r1") : null,
    tau_p: needsBeta(kind) ? optional(root, "tau_p") : null,
    tau_m: kind === "extended_stay_risk" ? optional(root, "tau_m") : null,
    n_sequences: num(root, "n_sequences"),
    n_posterior_draws: num(root, "n_posterior_draws"),
    seed: optional(root, "seed"),
  };
}

/** Form → request body; nulls for fields the kind does not use. */
export function toRequestBody(form: PatientForm) {
  return {
    kind: form.kind,
    alpha: form.alpha,
    beta1: form.beta1,
    r1: form.r1,
    tau_p: form.tau_p,
    tau_m: form.tau_m,
    n_sequences: form.n_sequences,
    n_posterior_draws: form.n_posterior_draws,
    ...(form.seed !== null ? { seed: form.seed } : {}),
  };
}
