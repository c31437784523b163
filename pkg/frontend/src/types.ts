/**
 * Request/response shapes for the MRSA what-if query service (HTTP API v1).
 *
 * These mirror the server's wire contract exactly; the console never
 * computes probabilities locally — every number shown comes from a
 * response produced by the service.
 */

export const ADMISSION_TYPES = ["emergency", "elective", "newborn", "other"] as const;
export type AdmissionType = (typeof ADMISSION_TYPES)[number];

export const QUERY_KINDS = [
  "admission_risk",
  "extended_stay_risk",
  "retest_now",
  "deisolation",
] as const;
export type QueryKind = (typeof QUERY_KINDS)[number];

export const SWEEP_AXES = ["horizon", "delay"] as const;
export type SweepAxis = (typeof SWEEP_AXES)[number];

/** Static admission covariates (alpha). */
export interface PatientAlpha {
  gender: number;
  age_years: number;
  admission_type: AdmissionType;
  from_healthcare_facility: number;
  cerebrovascular_history: number;
  diabetes: number;
  hospitalized_past_90d: number;
  mrsa_positive_past_90d: number;
}

/** Time-varying features at the most recent test (beta). */
export interface PatientBeta {
  ab_days_30: number;
  icu_days_7: number;
  dialysis_7d: number;
}

/** Everything the console's form collects. */
export interface PatientForm {
  kind: QueryKind;
  alpha: PatientAlpha;
  beta1: PatientBeta | null;
  r1: number | null;
  tau_p: number | null;
  tau_m: number | null;
  n_sequences: number;
  n_posterior_draws: number;
  seed: number | null;
}

export interface QueryRequestBody {
  kind: QueryKind;
  alpha: PatientAlpha;
  beta1?: PatientBeta | null;
  r1?: number | null;
  tau_p?: number | null;
  tau_m?: number | null;
  n_sequences?: number;
  n_posterior_draws?: number;
  seed?: number | null;
}

export interface SweepRequestBody extends QueryRequestBody {
  axis: SweepAxis;
  grid: number[];
}

export interface PosteriorBand {
  lo: number;
  hi: number;
}

export interface QueryResponse {
  estimate: number;
  mc_stderr: number;
  posterior_band: PosteriorBand;
  n_effective: number;
  inputs: Record<string, unknown>;
  seed: number;
  artifact_version: string;
  compute_seconds: number;
}

export interface SweepPoint {
  grid: number;
  estimate: number;
  mc_stderr: number;
  posterior_band: PosteriorBand;
  n_effective: number;
}

export interface SweepResponse {
  points: SweepPoint[];
  inputs: Record<string, unknown>;
  seed: number;
  artifact_version: string;
  compute_seconds: number;
}

export interface ModelInfo {
  artifact_version: string;
  subprograms: Array<{
    name: string;
    family: string;
    input_dim: number;
    censor_bound: number | null;
  }>;
  layout_table: Record<string, unknown>;
}

export interface HealthResponse {
  status: "ok" | "degraded";
  reason?: string;
}

export interface ValidationIssue {
  field: string;
  message: string;
}
