/** Wire payloads of the workbench service. */

export type Decision = "background" | "animal" | "unclear";

export interface QueryItemPayload {
  proposal_id: string;
  score: number;
  chip: string;
}

export interface QueryPayload {
  query_id: string;
  exemplar_id: string;
  exemplar_chip: string;
  items: QueryItemPayload[];
}

export interface SessionCounts {
  positives: number;
  negatives: number;
  promoted: number;
  removed_unclear: number;
  queries_answered: number;
}

export interface SessionRecordPayload {
  session_id: string;
  dataset_id: string;
  status: "active" | "finalized";
  counts: SessionCounts;
}

export interface VerdictPayload {
  proposal_id: string;
  decision: Decision;
  promote_to_exemplar: boolean;
}

export interface FeedbackResponse {
  report: {
    query_id: string;
    exemplar_id: string;
    promoted: string[];
    removed_unclear: string[];
    removed_animal: string[];
  };
  record: SessionRecordPayload;
}

export interface MetricsPayload {
  kind: "pr";
  auc: number;
  points: { threshold: number; x: number; y: number }[];
  counts: SessionCounts;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}
