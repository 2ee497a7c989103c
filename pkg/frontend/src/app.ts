/**
 * The screening application: one active query on screen, one in-flight
 * mutation at a time, counters always taken from server responses.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  QueryView,
  SessionView,
  cycleDecision,
  queryViewFrom,
  sessionViewFrom,
  toVerdicts,
  togglePromote,
  withConnectionError,
} from "./state.js";
import { bindKeyboard, renderNotice, renderQuery, renderSession } from "./render.js";

function submitKey(): string {
  return `submit-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 8)}`;
}

export class ScreenerApp {
  private session: SessionView | null = null;
  private query: QueryView | null = null;
  private inFlight = false;
  private notice: string | null = null;
  private unbind: (() => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async start(datasetId: string): Promise<void> {
    const record = await this.api.createSession(datasetId);
    this.session = sessionViewFrom(record);
    this.unbind = bindKeyboard(this.root.ownerDocument, {
      onCycle: (i) => this.cycle(i),
      onPromote: (i) => this.promote(i),
      onSubmit: () => void this.submit(),
    });
    await this.fetchQuery();
    this.render();
  }

  stop(): void {
    this.unbind?.();
  }

  get sessionId(): string {
    if (!this.session) throw new Error("session not started");
    return this.session.sessionId;
  }

  get currentQuery(): QueryView | null {
    return this.query;
  }

  private async fetchQuery(): Promise<void> {
    const payload = await this.api.getQuery(this.sessionId);
    this.query = payload === null ? null : queryViewFrom(payload, submitKey());
  }

  cycle(index: number): void {
    if (this.query) {
      this.query = cycleDecision(this.query, index);
      this.render();
    }
  }

  promote(index: number): void {
    if (this.query) {
      this.query = togglePromote(this.query, index);
      this.render();
    }
  }

  async submit(): Promise<void> {
    if (!this.query || this.inFlight) return;
    this.inFlight = true;
    this.notice = null;
    const { submitKey: key } = this.query;
    try {
      const response = await this.api.postFeedback(this.sessionId, toVerdicts(this.query), key);
      this.session = sessionViewFrom(response.record);
      await this.fetchQuery();
    } catch (err) {
      if (err instanceof ApiError && (err.code === "conflict" || err.code === "verdict_not_in_query")) {
        // The server advanced past this query: drop local verdicts, reload.
        this.notice = "The query changed on the server; your unsent verdicts were discarded.";
        await this.fetchQuery();
      } else if (err instanceof ApiError) {
        this.notice = `Request failed: ${err.message}`;
      } else {
        if (this.session) this.session = withConnectionError(this.session);
        this.notice = "Network unreachable; the submit will be retried.";
      }
    } finally {
      this.inFlight = false;
      this.render();
    }
  }

  render(): void {
    if (this.session) renderSession(this.root, this.session);
    renderQuery(this.root, this.api, this.query, {
      onCycle: (i) => this.cycle(i),
      onPromote: (i) => this.promote(i),
      onSubmit: () => void this.submit(),
    });
    renderNotice(this.root, this.notice);
  }
}
