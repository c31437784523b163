/**
 * Typed HTTP client for the what-if query service.
 *
 * All clinical numbers come from these endpoints; the console never
 * re-derives an estimate on its own.
 */

import type {
  HealthResponse,
  ModelInfo,
  QueryRequestBody,
  QueryResponse,
  SweepRequestBody,
  SweepResponse,
  ValidationIssue,
} from "./types";

const API_PREFIX = "/api/v1";

export class ApiError extends Error {
  readonly status: number;
  readonly issues: ValidationIssue[];

  constructor(status: number, message: string, issues: ValidationIssue[] = []) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.issues = issues;
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let issues: ValidationIssue[] = [];
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = (await res.json()) as Record<string, unknown>;
    if (Array.isArray(body.errors)) {
      issues = body.errors as ValidationIssue[];
      message = issues.map((e) => `${e.field}: ${e.message}`).join("; ") || message;
    } else if (typeof body.error === "string") {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, message, issues);
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(`${this.baseUrl}${API_PREFIX}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(`${this.baseUrl}${API_PREFIX}${path}`);
    await raiseForStatus(res);
    return (await res.json()) as T;
  }

  query(body: QueryRequestBody): Promise<QueryResponse> {
    return this.post<QueryResponse>("/query", body);
  }

  sweep(body: SweepRequestBody): Promise<SweepResponse> {
    return this.post<SweepResponse>("/sweep", body);
  }

  model(): Promise<ModelInfo> {
    return this.get<ModelInfo>("/model");
  }

  health(): Promise<HealthResponse> {
    return this.get<HealthResponse>("/health");
  }

  schema(): Promise<Record<string, unknown>> {
    return this.get<Record<string, unknown>>("/schema");
  }
}
