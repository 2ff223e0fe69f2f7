/** Thin typed client over the platform's HTTP surface.
 *
 * All state lives on the server; this client only reads views and posts the
 * few writes the UI is allowed: tags, notes/exclusions, and manual-step
 * confirmations. Server errors carry {error, message} and are surfaced as
 * ApiFailure so callers can show conflict notices verbatim.
 */

import type {
  ApiError,
  DashboardPayload,
  InboxTask,
  OrchestratorStatus,
  RecordDoc,
} from "./types.js";

export class ApiFailure extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, detail: ApiError) {
    super(detail.message);
    this.code = detail.error;
    this.status = status;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let detail: ApiError = { error: "Http", message: `HTTP ${response.status}` };
      try {
        const body = (await response.json()) as { detail?: ApiError };
        if (body.detail?.error) detail = body.detail;
      } catch {
        // non-JSON error body; keep the generic detail
      }
      throw new ApiFailure(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  dashboard(studyIdentifier: string): Promise<DashboardPayload> {
    return this.request(`/studies/${encodeURIComponent(studyIdentifier)}/dashboard`);
  }

  async inbox(): Promise<InboxTask[]> {
    const body = await this.request<{ tasks: InboxTask[] }>("/inbox");
    return body.tasks;
  }

  confirm(requestUuid: string, data: Record<string, unknown> | null): Promise<{ result_uuid: string }> {
    return this.post(`/inbox/${encodeURIComponent(requestUuid)}/confirm`, {
      data,
      operator: "ui-operator",
    });
  }

  async recordByIdentifier(identifier: string): Promise<RecordDoc> {
    const body = await this.request<{ records: RecordDoc[] }>(
      `/records?identifier=${encodeURIComponent(identifier)}`,
    );
    const record = body.records[0];
    if (!record) throw new ApiFailure(404, { error: "NotFound", message: identifier });
    return record;
  }

  addTag(recordId: string, tag: string): Promise<{ hooks: string[] }> {
    return this.post(`/records/${encodeURIComponent(recordId)}/tags`, { tag });
  }

  control(recordId: string, body: { excluded?: boolean; note?: string }): Promise<RecordDoc> {
    return this.post(`/records/${encodeURIComponent(recordId)}/control`, body);
  }

  orchestratorStatus(): Promise<OrchestratorStatus> {
    return this.request("/orchestrator/status");
  }

  async recordsByTag(tag: string): Promise<RecordDoc[]> {
    const body = await this.request<{ records: RecordDoc[] }>(
      `/records?tag=${encodeURIComponent(tag)}`,
    );
    return body.records;
  }

  async studies(): Promise<RecordDoc[]> {
    const body = await this.request<{ records?: RecordDoc[]; studies?: RecordDoc[] }>(
      "/studies",
    );
    return body.studies ?? body.records ?? [];
  }
}
