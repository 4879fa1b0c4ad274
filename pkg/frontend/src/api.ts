/** Typed client for the prediction service HTTP API. */

export interface HeatmapPayload {
  data: number[]; // row-major
  dims: [number, number]; // (h, w)
}

export interface PredictRequest {
  v?: number;
  sample_id?: string;
  query_image?: string; // base64 PNG/JPEG
  satellite_image?: string;
  query_kind?: string;
  click: [number, number]; // normalized (x, y) in [0, 1]
  sigma?: number;
  return_attention?: boolean;
}

export interface PredictResponse {
  v: number;
  bbox: [number, number, number, number]; // normalized cx, cy, w, h
  score: number;
  latency_ms: number;
  a_s: HeatmapPayload | null;
  f_u_l: HeatmapPayload | null;
}

export interface SampleInfo {
  sample_id: string;
  query_kind: string;
  class_label: string;
  split: string;
}

export interface HealthInfo {
  v: number;
  status: string;
  checkpoint_id: string;
  model_params: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

/**
 * At most one /predict request is in flight: issuing a new one aborts the
 * previous, so a burst of clicks resolves to the latest click only.
 */
export class ApiClient {
  private inflight: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return (await resp.json()) as T;
  }

  async health(): Promise<HealthInfo> {
    return this.getJson<HealthInfo>("/health");
  }

  async samples(): Promise<SampleInfo[]> {
    const body = await this.getJson<{ samples: SampleInfo[] }>("/samples");
    return body.samples;
  }

  imageUrl(sampleId: string, role: "query" | "satellite"): string {
    return `${this.baseUrl}/image/${encodeURIComponent(sampleId)}/${role}`;
  }

  /** Resolves null when superseded by a newer request. */
  async predict(req: PredictRequest): Promise<PredictResponse | null> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/predict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(req),
        signal: controller.signal,
      });
      if (!resp.ok) throw new ApiError(resp.status, await resp.text());
      return (await resp.json()) as PredictResponse;
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return null;
      throw err;
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}
