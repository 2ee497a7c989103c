/**
 * DOM rendering for the screening loop.
 *
 * Layout mirrors the screening protocol: the exemplar chip is pinned
 * top-left, the top-scoring candidates fill a grid beside it. Keys 1-8
 * cycle the matching chip's verdict; clicking the promote tag (visible
 * only on "animal" chips) marks the find as a future exemplar.
 */

import { ApiClient } from "./api.js";
import type { QueryView, SessionView } from "./state.js";

const DECISION_LABEL: Record<string, string> = {
  background: "background",
  animal: "animal",
  unclear: "unclear",
};

export function renderSession(root: HTMLElement, view: SessionView): void {
  let bar = root.querySelector<HTMLElement>(".session-bar");
  if (!bar) {
    bar = document.createElement("header");
    bar.className = "session-bar";
    root.prepend(bar);
  }
  const c = view.counts;
  bar.innerHTML = `
    <span class="session-id">${view.sessionId}</span>
    <span class="status" data-status="${view.status}">${view.status}</span>
    <span class="counter" data-counter="queries">${c.queries_answered} screened</span>
    <span class="counter" data-counter="promoted">${c.promoted} promoted</span>
    <span class="counter" data-counter="unclear">${c.removed_unclear} unclear</span>
    <span class="counter" data-counter="pools">${c.positives}+ / ${c.negatives}-</span>
    <span class="connection" data-connection="${view.connection}">${
      view.connection === "ok" ? "connected" : "connection lost; retrying"
    }</span>`;
}

export interface QueryCallbacks {
  onCycle(index: number): void;
  onPromote(index: number): void;
  onSubmit(): void;
}

export function renderQuery(
  root: HTMLElement,
  api: ApiClient,
  view: QueryView | null,
  callbacks: QueryCallbacks,
): void {
  let panel = root.querySelector<HTMLElement>(".query-panel");
  if (!panel) {
    panel = document.createElement("main");
    panel.className = "query-panel";
    root.append(panel);
  }
  if (view === null) {
    panel.innerHTML = `<p class="done">Every exemplar has been screened.</p>`;
    return;
  }
  panel.innerHTML = "";

  const exemplar = document.createElement("figure");
  exemplar.className = "exemplar";
  exemplar.innerHTML = `
    <img alt="exemplar chip" src="${api.chipUrl(view.exemplarChip)}">
    <figcaption>exemplar ${view.exemplarId}</figcaption>`;
  panel.append(exemplar);

  const grid = document.createElement("section");
  grid.className = "chip-grid";
  view.chips.forEach((chip, index) => {
    const cell = document.createElement("figure");
    cell.className = "chip";
    cell.dataset.decision = chip.decision;
    cell.dataset.proposal = chip.proposalId;
    const promote =
      chip.decision === "animal"
        ? `<button class="promote" data-promoted="${chip.promote}">${
            chip.promote ? "will become exemplar" : "promote to exemplar"
          }</button>`
        : "";
    cell.innerHTML = `
      <img alt="candidate chip ${index + 1}" src="${api.chipUrl(chip.chipRef)}">
      <figcaption>
        <kbd>${index + 1}</kbd>
        <span class="decision">${DECISION_LABEL[chip.decision]}</span>
        <span class="score">${chip.score.toFixed(3)}</span>
      </figcaption>
      ${promote}`;
    cell.querySelector("img")!.addEventListener("click", () => callbacks.onCycle(index));
    cell.querySelector(".promote")?.addEventListener("click", () => callbacks.onPromote(index));
    grid.append(cell);
  });
  panel.append(grid);

  const submit = document.createElement("button");
  submit.className = "submit";
  submit.textContent = "Submit verdicts";
  submit.addEventListener("click", () => callbacks.onSubmit());
  panel.append(submit);
}

export function renderNotice(root: HTMLElement, message: string | null): void {
  let box = root.querySelector<HTMLElement>(".notice");
  if (!box) {
    box = document.createElement("aside");
    box.className = "notice";
    root.append(box);
  }
  box.textContent = message ?? "";
  box.hidden = message === null;
}

export function bindKeyboard(target: EventTarget, callbacks: QueryCallbacks): () => void {
  const handler = (event: Event) => {
    const key = (event as KeyboardEvent).key;
    if (key >= "1" && key <= "8") {
      callbacks.onCycle(Number(key) - 1);
    } else if (key === "Enter") {
      callbacks.onSubmit();
    }
  };
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
