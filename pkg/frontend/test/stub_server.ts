/** In-memory fetch stub honoring the platform's endpoint contract.
 *
 * Mirrors the semantics the tests rely on: pending manual requests appear in
 * the inbox, a confirmation resolves the underlying request exactly once,
 * and a second confirmation is rejected with a DuplicateResult conflict.
 */

import type { FetchLike } from "../src/api.js";
import type { InboxTask, JsonSchema } from "../src/types.js";

interface StubRequest {
  request_uuid: string;
  capability: [string, string];
  parameters: Record<string, unknown>;
  status: "pending" | "reserved" | "resolved";
  form_schema: JsonSchema;
  result?: Record<string, unknown>;
}

export const TRANSPORT_SCHEMA: JsonSchema = {
  type: "object",
  required: ["confirmed"],
  properties: { confirmed: { type: "boolean" }, note: { type: "string" } },
};

export const ELECTROLYTE_SCHEMA: JsonSchema = {
  type: "object",
  required: ["batch_id", "volume_ml"],
  properties: {
    batch_id: { type: "string" },
    volume_ml: { type: "number", minimum: 0 },
    composition: { type: "string" },
  },
};

export class StubBackend {
  requests = new Map<string, StubRequest>();
  records = new Map<string, { record_id: string; identifier: string; title: string; metadata: Record<string, unknown>; tags: string[]; created_at: string; updated_at: string }>();
  dashboards = new Map<string, unknown>();
  private counter = 0;

  addManualRequest(
    capability: [string, string],
    parameters: Record<string, unknown>,
    schema: JsonSchema,
  ): string {
    const uuid = `req-${++this.counter}`;
    this.requests.set(uuid, {
      request_uuid: uuid,
      capability,
      parameters,
      status: "pending",
      form_schema: schema,
    });
    return uuid;
  }

  addRecord(identifier: string, metadata: Record<string, unknown> = {}, tags: string[] = []) {
    const record = {
      record_id: `rec-${++this.counter}`,
      identifier,
      title: identifier,
      metadata,
      tags,
      created_at: "2024-01-01T00:00:00.000+00:00",
      updated_at: "2024-01-01T00:00:00.000+00:00",
    };
    this.records.set(record.record_id, record);
    return record;
  }

  status(uuid: string): string | undefined {
    return this.requests.get(uuid)?.status;
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const { pathname, searchParams } = new URL(url, "http://stub");
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;

    if (method === "GET" && pathname === "/inbox") {
      const tasks: InboxTask[] = [...this.requests.values()]
        .filter((r) => r.status === "pending")
        .map((r) => ({
          request_uuid: r.request_uuid,
          capability: r.capability,
          parameters: r.parameters,
          posted_at: "2024-01-01T00:00:00.000+00:00",
          form_schema: r.form_schema,
        }));
      return json({ tasks });
    }

    const confirm = pathname.match(/^\/inbox\/([^/]+)\/confirm$/);
    if (method === "POST" && confirm) {
      const request = this.requests.get(confirm[1]!);
      if (!request) {
        return json({ detail: { error: "NotFound", message: "no such request" } }, 404);
      }
      if (request.status === "resolved") {
        return json(
          { detail: { error: "DuplicateResult", message: `request ${request.request_uuid} already has a result` } },
          409,
        );
      }
      request.status = "resolved";
      request.result = body?.data ?? { confirmed: true };
      return json({ result_uuid: `res-${request.request_uuid}`, request_uuid: request.request_uuid });
    }

    const dash = pathname.match(/^\/studies\/([^/]+)\/dashboard$/);
    if (method === "GET" && dash) {
      const payload = this.dashboards.get(decodeURIComponent(dash[1]!));
      if (!payload) return json({ detail: { error: "NotFound", message: "no study" } }, 404);
      return json(payload);
    }

    if (method === "GET" && pathname === "/studies") {
      return json({ studies: [...this.records.values()].filter((r) => "design_parameters" in r.metadata) });
    }

    if (method === "GET" && pathname === "/records") {
      const identifier = searchParams.get("identifier");
      const tag = searchParams.get("tag");
      let records = [...this.records.values()];
      if (identifier) records = records.filter((r) => r.identifier === identifier);
      if (tag) records = records.filter((r) => r.tags.includes(tag));
      if (identifier && records.length === 0) {
        return json({ detail: { error: "NotFound", message: identifier } }, 404);
      }
      return json({ records });
    }

    const tags = pathname.match(/^\/records\/([^/]+)\/tags$/);
    if (method === "POST" && tags) {
      const record = this.records.get(tags[1]!);
      if (!record) return json({ detail: { error: "NotFound", message: "no record" } }, 404);
      if (!record.tags.includes(body.tag)) record.tags.push(body.tag);
      return json({ record_id: record.record_id, tag: body.tag, hooks: [] });
    }

    const control = pathname.match(/^\/records\/([^/]+)\/control$/);
    if (method === "POST" && control) {
      const record = this.records.get(control[1]!);
      if (!record) return json({ detail: { error: "NotFound", message: "no record" } }, 404);
      if (body.excluded !== undefined) record.metadata.excluded = body.excluded;
      if (body.note !== undefined) {
        const notes = (record.metadata.notes as string[] | undefined) ?? [];
        notes.push(body.note);
        record.metadata.notes = notes;
      }
      return json(record);
    }

    if (method === "GET" && pathname === "/orchestrator/status") {
      return json({ active: [], archived: 0, max_parallel: 3 });
    }

    return json({ detail: { error: "NotFound", message: `no stub for ${method} ${pathname}` } }, 404);
  };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}
