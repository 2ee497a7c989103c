/**
 * Screening state: pure functions over server responses plus unsent verdicts.
 *
 * Every chip starts as "background" (at savanna class ratios that is almost
 * always the truth, so the screener only touches exceptions). Keys 1-8 cycle
 * background -> animal -> unclear -> background; a promote toggle is only
 * meaningful while a chip is marked animal. Counters always mirror the last
 * server record, never a local extrapolation.
 */

import type {
  Decision,
  QueryPayload,
  SessionCounts,
  SessionRecordPayload,
  VerdictPayload,
} from "./types.js";

export interface ChipState {
  readonly proposalId: string;
  readonly score: number;
  readonly chipRef: string;
  readonly decision: Decision;
  readonly promote: boolean;
}

export interface QueryView {
  readonly queryId: string;
  readonly exemplarId: string;
  readonly exemplarChip: string;
  readonly chips: readonly ChipState[];
  /** One idempotency key per query: a retry of this submit reuses it. */
  readonly submitKey: string;
}

export interface SessionView {
  readonly sessionId: string;
  readonly status: "active" | "finalized";
  readonly counts: SessionCounts;
  readonly connection: "ok" | "error";
}

const CYCLE: readonly Decision[] = ["background", "animal", "unclear"];

export function queryViewFrom(payload: QueryPayload, submitKey: string): QueryView {
  return {
    queryId: payload.query_id,
    exemplarId: payload.exemplar_id,
    exemplarChip: payload.exemplar_chip,
    submitKey,
    chips: payload.items.map((item) => ({
      proposalId: item.proposal_id,
      score: item.score,
      chipRef: item.chip,
      decision: "background" as Decision,
      promote: false,
    })),
  };
}

export function cycleDecision(view: QueryView, index: number): QueryView {
  const chip = view.chips[index];
  if (!chip) return view;
  const next = CYCLE[(CYCLE.indexOf(chip.decision) + 1) % CYCLE.length]!;
  const chips = view.chips.map((c, i) =>
    i === index ? { ...c, decision: next, promote: next === "animal" ? c.promote : false } : c,
  );
  return { ...view, chips };
}

export function togglePromote(view: QueryView, index: number): QueryView {
  const chip = view.chips[index];
  if (!chip || chip.decision !== "animal") return view;
  const chips = view.chips.map((c, i) => (i === index ? { ...c, promote: !c.promote } : c));
  return { ...view, chips };
}

export function toVerdicts(view: QueryView): VerdictPayload[] {
  return view.chips.map((c) => ({
    proposal_id: c.proposalId,
    decision: c.decision,
    promote_to_exemplar: c.promote,
  }));
}

export function sessionViewFrom(record: SessionRecordPayload): SessionView {
  return {
    sessionId: record.session_id,
    status: record.status,
    counts: record.counts,
    connection: "ok",
  };
}

export function withConnectionError(view: SessionView): SessionView {
  return { ...view, connection: "error" };
}
