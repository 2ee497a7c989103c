import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { cycleDecision, queryViewFrom, sessionViewFrom } from "../src/state.js";
import { bindKeyboard, renderQuery, renderSession } from "../src/render.js";
import type { QueryPayload } from "../src/types.js";

const payload: QueryPayload = {
  query_id: "s1:q0",
  exemplar_id: "img:m1",
  exemplar_chip: "chips/img:m1",
  items: Array.from({ length: 8 }, (_, i) => ({
    proposal_id: `img:p${i}`,
    score: 0.9 - i * 0.05,
    chip: `chips/img:p${i}`,
  })),
};

const api = new ApiClient("http://svc");

describe("rendering", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = `<div id="app"></div>`;
    root = document.getElementById("app")!;
  });

  it("pins the exemplar and renders the candidate grid", () => {
    const view = queryViewFrom(payload, "k");
    renderQuery(root, api, view, { onCycle() {}, onPromote() {}, onSubmit() {} });
    expect(root.querySelectorAll(".exemplar img")).toHaveLength(1);
    expect(root.querySelectorAll(".chip")).toHaveLength(8);
    const first = root.querySelector<HTMLElement>(".chip")!;
    expect(first.dataset.decision).toBe("background");
  });

  it("shows the promote toggle only on animal chips", () => {
    let view = queryViewFrom(payload, "k");
    renderQuery(root, api, view, { onCycle() {}, onPromote() {}, onSubmit() {} });
    expect(root.querySelectorAll(".promote")).toHaveLength(0);
    view = cycleDecision(view, 3);
    renderQuery(root, api, view, { onCycle() {}, onPromote() {}, onSubmit() {} });
    const toggles = root.querySelectorAll(".promote");
    expect(toggles).toHaveLength(1);
    expect(root.querySelectorAll(".chip")[3]!.contains(toggles[0]!)).toBe(true);
  });

  it("keyboard keys 1-8 cycle the matching chip", () => {
    const seen: number[] = [];
    const unbind = bindKeyboard(document, {
      onCycle: (i) => seen.push(i),
      onPromote() {},
      onSubmit() {},
    });
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "3" }));
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "8" }));
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "x" }));
    unbind();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "1" }));
    expect(seen).toEqual([2, 7]);
  });

  it("renders server counters verbatim", () => {
    const view = sessionViewFrom({
      session_id: "s9",
      dataset_id: "demo",
      status: "active",
      counts: { positives: 12, negatives: 80, promoted: 4, removed_unclear: 1, queries_answered: 6 },
    });
    renderSession(root, view);
    expect(root.querySelector('[data-counter="queries"]')!.textContent).toContain("6");
    expect(root.querySelector('[data-counter="promoted"]')!.textContent).toContain("4");
    expect(root.querySelector('[data-connection="ok"]')).not.toBeNull();
  });
});
