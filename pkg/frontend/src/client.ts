// Thin /v1 client. The fetch function is injectable so tests can substitute
// a fake server; the editor never talks to any other backend.

import type { GenerateResponse, LayoutResponse, ValidateResponse, VocabInfo } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string, readonly where?: string) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(private baseUrl = "", private fetchFn: FetchLike = (...a) => fetch(...a)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body.error ?? response.statusText, body.where);
    }
    return body as T;
  }

  getVocab(): Promise<VocabInfo> {
    return this.request<VocabInfo>("/v1/vocab");
  }

  validate(doc: string): Promise<ValidateResponse> {
    return this.request<ValidateResponse>("/v1/validate", { method: "POST", body: doc });
  }

  layout(doc: string, signal?: AbortSignal): Promise<LayoutResponse> {
    return this.request<LayoutResponse>("/v1/layout", { method: "POST", body: doc, signal });
  }

  generate(doc: string): Promise<GenerateResponse> {
    return this.request<GenerateResponse>("/v1/generate", { method: "POST", body: doc });
  }
}
