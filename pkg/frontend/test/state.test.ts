import { describe, expect, it } from "vitest";

import {
  cycleDecision,
  queryViewFrom,
  sessionViewFrom,
  toVerdicts,
  togglePromote,
} from "../src/state.js";
import type { QueryPayload, SessionRecordPayload } from "../src/types.js";

const payload: QueryPayload = {
  query_id: "s1:q0",
  exemplar_id: "img:m1",
  exemplar_chip: "chips/img:m1",
  items: Array.from({ length: 8 }, (_, i) => ({
    proposal_id: `img:p${i}`,
    score: 0.9 - i * 0.1,
    chip: `chips/img:p${i}`,
  })),
};

describe("query view", () => {
  it("defaults every chip to background", () => {
    const view = queryViewFrom(payload, "k0");
    expect(view.chips).toHaveLength(8);
    expect(view.chips.every((c) => c.decision === "background" && !c.promote)).toBe(true);
  });

  it("cycles background -> animal -> unclear -> background", () => {
    let view = queryViewFrom(payload, "k0");
    view = cycleDecision(view, 2);
    expect(view.chips[2]!.decision).toBe("animal");
    view = cycleDecision(view, 2);
    expect(view.chips[2]!.decision).toBe("unclear");
    view = cycleDecision(view, 2);
    expect(view.chips[2]!.decision).toBe("background");
  });

  it("three presses return to background (cycle of three)", () => {
    let view = queryViewFrom(payload, "k0");
    for (let i = 0; i < 3; i += 1) view = cycleDecision(view, 4);
    expect(view.chips[4]!.decision).toBe("background");
  });

  it("promote only sticks on animal chips and clears when cycled away", () => {
    let view = queryViewFrom(payload, "k0");
    view = togglePromote(view, 0); // background: no-op
    expect(view.chips[0]!.promote).toBe(false);
    view = cycleDecision(view, 0);
    view = togglePromote(view, 0);
    expect(view.chips[0]!.promote).toBe(true);
    view = cycleDecision(view, 0); // -> unclear clears promotion
    expect(view.chips[0]!.promote).toBe(false);
  });

  it("does not mutate earlier views", () => {
    const before = queryViewFrom(payload, "k0");
    const after = cycleDecision(before, 1);
    expect(before.chips[1]!.decision).toBe("background");
    expect(after.chips[1]!.decision).toBe("animal");
  });

  it("serializes verdicts for every chip", () => {
    let view = queryViewFrom(payload, "k0");
    view = cycleDecision(view, 0);
    view = togglePromote(view, 0);
    const verdicts = toVerdicts(view);
    expect(verdicts).toHaveLength(8);
    expect(verdicts[0]).toEqual({
      proposal_id: "img:p0",
      decision: "animal",
      promote_to_exemplar: true,
    });
    expect(verdicts[1]).toEqual({
      proposal_id: "img:p1",
      decision: "background",
      promote_to_exemplar: false,
    });
  });

  it("out-of-range indices are ignored", () => {
    const view = queryViewFrom(payload, "k0");
    expect(cycleDecision(view, 17)).toBe(view);
    expect(togglePromote(view, 17)).toBe(view);
  });
});

describe("session view", () => {
  it("mirrors the server record verbatim", () => {
    const record: SessionRecordPayload = {
      session_id: "s1",
      dataset_id: "demo",
      status: "active",
      counts: { positives: 9, negatives: 40, promoted: 1, removed_unclear: 2, queries_answered: 3 },
    };
    const view = sessionViewFrom(record);
    expect(view.counts).toEqual(record.counts);
    expect(view.connection).toBe("ok");
  });
});
