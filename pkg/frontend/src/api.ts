/** Typed client for the decision-support service HTTP API. */

export interface SourceRef {
  chunk_id: string;
  score: number;
  text: string;
  doc_id: string;
}

export interface QueryResponse {
  answer: string;
  sources: SourceRef[];
  summary_used: string | null;
  prompt_hash: string;
}

export interface SummaryResponse {
  summary: string;
  generated_by: string;
  source_resource_ids: string[];
  patient_id?: string;
}

export interface QueryRequest {
  question: string;
  patient_id?: string;
  summary?: string;
  k?: number;
}

export interface FeedbackRequest {
  prompt_hash: string;
  question: string;
  rater_id: string;
  score: number;
  comment?: string;
}

export class ServiceError extends Error {
  constructor(message: string, public status: number | null = null) {
    super(message);
  }
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
    private bearerToken?: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private headers(json = true): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) {
      headers["Content-Type"] = "application/json";
    }
    if (this.bearerToken) {
      headers["Authorization"] = `Bearer ${this.bearerToken}`;
    }
    return headers;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (error) {
      throw new ServiceError(`request to ${path} failed: ${String(error)}`);
    }
    if (!response.ok) {
      let detail = `HTTP ${response.status}`;
      try {
        const payload = (await response.json()) as { detail?: unknown };
        if (payload.detail) {
          detail += `: ${JSON.stringify(payload.detail)}`;
        }
      } catch {
        // non-JSON error body; status alone is enough
      }
      throw new ServiceError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; chunks: number }> {
    return this.request("/health", { headers: this.headers(false) });
  }

  patientSummary(patientId: string): Promise<SummaryResponse> {
    return this.request(`/patients/${encodeURIComponent(patientId)}/summary`, {
      headers: this.headers(false),
    });
  }

  query(body: QueryRequest): Promise<QueryResponse> {
    return this.request("/query", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
  }

  async submitFeedback(body: FeedbackRequest): Promise<void> {
    if (!Number.isInteger(body.score) || body.score < 1 || body.score > 5) {
      throw new RangeError(`rating must be an integer in 1..5, got ${body.score}`);
    }
    await this.request("/feedback", {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body),
    });
  }
}
