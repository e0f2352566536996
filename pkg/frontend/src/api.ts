/** Typed client for the backend HTTP API. */

import type {
  DefectDetail,
  DefectQuery,
  DefectRecord,
  MarkingRecord,
  ProcessingJob,
  ValidationStatus,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

export interface NamedFile {
  name: string;
  blob: Blob;
}

/** Query string for /api/defects and /api/export from a structured filter. */
export function buildDefectQuery(query: DefectQuery): URLSearchParams {
  const params = new URLSearchParams();
  if (query.classes?.length) params.set("class", query.classes.join(","));
  if (query.statuses?.length) params.set("status", query.statuses.join(","));
  if (query.geoBox) {
    params.set("min_lat", String(query.geoBox.minLat));
    params.set("min_lon", String(query.geoBox.minLon));
    params.set("max_lat", String(query.geoBox.maxLat));
    params.set("max_lon", String(query.geoBox.maxLon));
  }
  if (query.imageId) params.set("image_id", query.imageId);
  return params;
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let code = "http_error";
      let detail = `${resp.status}`;
      try {
        const body = await resp.json();
        code = body.error ?? code;
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(resp.status, code, detail);
    }
    return (await resp.json()) as T;
  }

  listDefects(query: DefectQuery = {}): Promise<DefectRecord[]> {
    const params = buildDefectQuery(query);
    const suffix = params.size ? `?${params}` : "";
    return this.request<DefectRecord[]>(`/api/defects${suffix}`);
  }

  getDefect(id: string): Promise<DefectDetail> {
    return this.request<DefectDetail>(`/api/defects/${id}`);
  }

  validateDefect(id: string, status: ValidationStatus, user: string): Promise<DefectRecord> {
    return this.request<DefectRecord>(`/api/defects/${id}/validation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ status, user }),
    });
  }

  listMarkings(imageId?: string): Promise<MarkingRecord[]> {
    const suffix = imageId ? `?image_id=${encodeURIComponent(imageId)}` : "";
    return this.request<MarkingRecord[]>(`/api/markings${suffix}`);
  }

  validateMarking(id: string, status: ValidationStatus, user: string): Promise<MarkingRecord> {
    return this.request<MarkingRecord>(`/api/markings/${id}/validation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ status, user }),
    });
  }

  async upload(files: NamedFile[]): Promise<{ job_id: string }> {
    const form = new FormData();
    for (const file of files) form.append("files", file.blob, file.name);
    return this.request<{ job_id: string }>("/api/uploads", { method: "POST", body: form });
  }

  getJob(id: string): Promise<ProcessingJob> {
    return this.request<ProcessingJob>(`/api/jobs/${id}`);
  }

  exportUrl(format: "csv" | "json", validatedOnly: boolean, query: DefectQuery = {}): string {
    const params = buildDefectQuery(query);
    params.set("format", format);
    params.set("validated_only", validatedOnly ? "true" : "false");
    return `${this.baseUrl}/api/export?${params}`;
  }

  async fetchExport(
    format: "csv" | "json",
    validatedOnly: boolean,
    query: DefectQuery = {},
  ): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.exportUrl(format, validatedOnly, query));
    if (!resp.ok) throw new ApiError(resp.status, "http_error", `export failed: ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
