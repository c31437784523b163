/** Shared helpers for the live-service tests. */

import { ApiClient } from "../src/api";
import type { PatientForm, QueryKind } from "../src/types";

export const BASE_URL = "http://127.0.0.1:8123";

export function liveClient(): ApiClient {
  return new ApiClient(BASE_URL);
}

/** A form that is valid for the given query kind. */
export function validForm(kind: QueryKind): PatientForm {
  const needsBeta = kind !== "admission_risk";
  return {
    kind,
    alpha: {
      gender: 1,
      age_years: 64,
      admission_type: "emergency",
      from_healthcare_facility: 0,
      cerebrovascular_history: 0,
      diabetes: 1,
      hospitalized_past_90d: 0,
      mrsa_positive_past_90d: 0,
    },
    beta1: needsBeta ? { ab_days_30: 3, icu_days_7: 1, dialysis_7d: 0 } : null,
    r1: kind === "extended_stay_risk" || kind === "retest_now" ? 0 : null,
    tau_p: needsBeta ? 1.5 : null,
    tau_m: kind === "extended_stay_risk" ? 7 : null,
    n_sequences: 300,
    n_posterior_draws: 5,
    seed: 42,
  };
}

/** Deterministic 32-bit PRNG so fuzz failures are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
