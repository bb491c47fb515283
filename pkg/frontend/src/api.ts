/**
 * Typed client for the dpm service JSON API. Every view draws its numbers
 * from these payloads; the client never post-processes values beyond
 * JSON parsing.
 */

export interface DatasetSummary {
  dataset_id: string;
  n_subjects: number;
  n_visits: number;
}

export interface ModelDatasetBlock extends DatasetSummary {
  model_variables: string[];
  extra_variables: string[];
  outcome_names: string[];
}

export interface ModelInfo {
  model_id: string;
  n_states: number;
  initial: number[];
  transition: number[][];
  emission: Record<string, number[]>;
  trained_on: string;
  log_likelihood: number;
  seed: number;
  n_iterations_run: number;
  dataset: ModelDatasetBlock;
}

export interface TrainResult {
  model_id: string;
  log_likelihood: number;
  n_iterations_run: number;
}

/** Per-state probabilities by variable; null marks an undefined cell
 * (no decoded visits fell in that state). */
export interface FeatureMatrixData {
  states: number[];
  rows: Record<string, Array<number | null>>;
  source: Record<string, "model" | "empirical">;
}

export interface WaterfallPoint {
  subject_id: string;
  age_months: number;
  state: number;
  posterior_max: number;
}

export interface DensityData {
  outcome: string;
  sample_ages: number[];
  bandwidth: number;
  grid: Array<[number, number]>;
}

export interface SubjectVisit {
  age_months: number;
  observations: Record<string, number>;
  state: number;
  posterior: number[];
}

export interface SubjectDetail {
  visits: SubjectVisit[];
  viterbi_path: number[];
}

export interface CohortInfo {
  cohort_id: string;
  name: string;
  query_text: string;
  member_ids: string[];
  created_from_model: string;
}

export interface ErrorBody {
  code: string;
  message: string;
  detail?: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(base = "", fetchImpl?: FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok) {
      let body: ErrorBody;
      try {
        body = (await res.json()) as ErrorBody;
      } catch {
        body = { code: "HttpError", message: `HTTP ${res.status}` };
      }
      throw new ApiError(res.status, body);
    }
    if (res.status === 204) {
      return undefined as T;
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  uploadDataset(csv: string, config: unknown): Promise<DatasetSummary> {
    return this.post("/api/datasets", { csv, config });
  }

  trainModel(body: {
    dataset_id: string;
    n_states: number;
    seed: number;
    max_iter?: number;
    n_restarts?: number;
  }): Promise<TrainResult> {
    return this.post("/api/models", body);
  }

  getModel(modelId: string): Promise<ModelInfo> {
    return this.request(`/api/models/${encodeURIComponent(modelId)}`);
  }

  getFeatureMatrix(modelId: string, vars?: string[]): Promise<FeatureMatrixData> {
    const params = new URLSearchParams();
    if (vars && vars.length > 0) {
      params.set("vars", vars.join(","));
    }
    return this.request(this.scoped(modelId, "feature-matrix", params));
  }

  getWaterfall(modelId: string, cohortId?: string | null): Promise<WaterfallPoint[]> {
    return this.request(this.scoped(modelId, "waterfall", this.cohortParams(cohortId)));
  }

  getDensity(
    modelId: string,
    outcome: string,
    cohortId?: string | null,
  ): Promise<DensityData> {
    const params = new URLSearchParams();
    params.set("outcome", outcome);
    if (cohortId) {
      params.set("cohort_id", cohortId);
    }
    return this.request(this.scoped(modelId, "density", params));
  }

  getSubject(modelId: string, subjectId: string): Promise<SubjectDetail> {
    return this.request(
      `/api/models/${encodeURIComponent(modelId)}/subjects/${encodeURIComponent(subjectId)}`,
    );
  }

  listCohorts(): Promise<CohortInfo[]> {
    return this.request("/api/cohorts");
  }

  createCohort(modelId: string, name: string, query: string): Promise<CohortInfo> {
    return this.post("/api/cohorts", { model_id: modelId, name, query });
  }

  deleteCohort(cohortId: string): Promise<void> {
    return this.request(`/api/cohorts/${encodeURIComponent(cohortId)}`, {
      method: "DELETE",
    });
  }

  private scoped(modelId: string, leaf: string, params: URLSearchParams): string {
    const query = params.toString();
    const path = `/api/models/${encodeURIComponent(modelId)}/${leaf}`;
    return query ? `${path}?${query}` : path;
  }

  private cohortParams(cohortId?: string | null): URLSearchParams {
    const params = new URLSearchParams();
    if (cohortId) {
      params.set("cohort_id", cohortId);
    }
    return params;
  }
}
