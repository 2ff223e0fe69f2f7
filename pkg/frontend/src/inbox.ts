/** Manual-task inbox: pending transport confirmations and electrolyte entry.
 *
 * Form fields are generated from the capability's registered output schema
 * (served with each task), so the client needs no per-capability knowledge.
 * Confirming posts the result through the broker; a lost race surfaces the
 * broker's DuplicateResult verbatim as a conflict notice.
 */

import { ApiClient, ApiFailure } from "./api.js";
import type { InboxTask, JsonSchema } from "./types.js";

export interface FormField {
  name: string;
  type: "number" | "integer" | "string" | "boolean";
  required: boolean;
  default?: unknown;
  minimum?: number;
  maximum?: number;
}

export function formFields(schema: JsonSchema): FormField[] {
  const required = new Set(schema.required ?? []);
  const out: FormField[] = [];
  for (const [name, prop] of Object.entries(schema.properties ?? {})) {
    const type =
      prop.type === "number" || prop.type === "integer" || prop.type === "boolean"
        ? prop.type
        : "string";
    const field: FormField = { name, type, required: required.has(name) };
    if (prop.default !== undefined) field.default = prop.default;
    if (prop.minimum !== undefined) field.minimum = prop.minimum;
    if (prop.maximum !== undefined) field.maximum = prop.maximum;
    out.push(field);
  }
  return out;
}

export interface FieldErrors {
  [name: string]: string;
}

/** Client-side pre-validation: block obviously bad submissions early.
 * The server remains authoritative (it re-validates against the schema). */
export function validateForm(
  fields: FormField[],
  values: Record<string, unknown>,
): FieldErrors {
  const errors: FieldErrors = {};
  for (const field of fields) {
    const value = values[field.name];
    if (value === undefined || value === null || value === "") {
      if (field.required) errors[field.name] = "required";
      continue;
    }
    if (field.type === "number" || field.type === "integer") {
      const num = typeof value === "number" ? value : Number(value);
      if (Number.isNaN(num)) {
        errors[field.name] = "must be a number";
        continue;
      }
      if (field.type === "integer" && !Number.isInteger(num)) {
        errors[field.name] = "must be an integer";
        continue;
      }
      if (field.minimum !== undefined && num < field.minimum) {
        errors[field.name] = `must be >= ${field.minimum}`;
      }
      if (field.maximum !== undefined && num > field.maximum) {
        errors[field.name] = `must be <= ${field.maximum}`;
      }
    }
  }
  return errors;
}

export function coerceValues(
  fields: FormField[],
  raw: Record<string, string | boolean>,
): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const field of fields) {
    const value = raw[field.name];
    if (value === undefined || value === "") {
      if (field.default !== undefined) out[field.name] = field.default;
      continue;
    }
    if (field.type === "number") out[field.name] = Number(value);
    else if (field.type === "integer") out[field.name] = Math.trunc(Number(value));
    else if (field.type === "boolean") out[field.name] = value === true || value === "true";
    else out[field.name] = String(value);
  }
  return out;
}

export type ConfirmOutcome =
  | { kind: "confirmed"; resultUuid: string }
  | { kind: "conflict"; notice: string }
  | { kind: "invalid"; errors: FieldErrors }
  | { kind: "error"; notice: string };

export async function confirmTask(
  api: ApiClient,
  task: InboxTask,
  values: Record<string, unknown> | null,
): Promise<ConfirmOutcome> {
  if (values !== null) {
    const errors = validateForm(formFields(task.form_schema), values);
    if (Object.keys(errors).length > 0) {
      return { kind: "invalid", errors };
    }
  }
  try {
    const result = await api.confirm(task.request_uuid, values);
    return { kind: "confirmed", resultUuid: result.result_uuid };
  } catch (err) {
    if (err instanceof ApiFailure && err.code === "DuplicateResult") {
      return {
        kind: "conflict",
        notice: `another operator confirmed first: ${err.message}`,
      };
    }
    return { kind: "error", notice: err instanceof Error ? err.message : String(err) };
  }
}
