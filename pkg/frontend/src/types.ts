/** Wire types mirrored from the server.
 *
 * The dashboard payload is versioned; the client refuses to render a version
 * it does not understand rather than guessing at the schema.
 */

export const SUPPORTED_PAYLOAD_VERSION = 1;

export interface ObjectiveSpec {
  name: string;
  direction: "min" | "max";
}

export interface DashboardPoint {
  batch: number;
  config: Record<string, number>;
  formation_time_h: number;
  formation_time_se_h: number;
  eol_cycles: number;
  eol_se_cycles: number;
  n_replicates: number;
  excluded: boolean;
  /** Server-computed; the client never recomputes Pareto membership. */
  pareto: boolean;
}

export interface MarginalHistogram {
  objective: string;
  edges: number[];
  pareto_counts: number[];
  dominated_counts: number[];
}

export interface ContourGrid {
  objective: string;
  x: string;
  y: string;
  fixed: Record<string, number>;
  x_values: number[];
  y_values: number[];
  mean: number[][];
}

export interface HypervolumePoint {
  iteration: number;
  batch: number;
  hypervolume: number;
}

export interface DashboardPayload {
  version: number;
  objectives: ObjectiveSpec[];
  reference_point: number[] | null;
  points: DashboardPoint[];
  marginals: MarginalHistogram[];
  contours: ContourGrid[];
  hypervolume_trace: HypervolumePoint[];
}

export interface JsonSchema {
  type?: string;
  required?: string[];
  properties?: Record<string, JsonSchema & { default?: unknown }>;
  minimum?: number;
  maximum?: number;
  enum?: unknown[];
  additionalProperties?: boolean | JsonSchema;
}

export interface InboxTask {
  request_uuid: string;
  capability: [string, string];
  parameters: Record<string, unknown>;
  posted_at: string;
  form_schema: JsonSchema;
}

export interface RecordDoc {
  record_id: string;
  identifier: string;
  title: string;
  metadata: Record<string, unknown>;
  tags: string[];
  created_at: string;
  updated_at: string;
}

export interface OrchestratorStatus {
  active: {
    workflow_uuid: string;
    phase: string;
    step: string | null;
    trial_ref: string;
  }[];
  archived: number;
  max_parallel: number;
}

export interface ApiError {
  error: string;
  message: string;
}
