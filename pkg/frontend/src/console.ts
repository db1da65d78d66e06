// View-model for the editing console. It owns no knowledge state of its
// own: every mutation goes to the service and is followed by a refresh,
// so what the panels show is always what the server last said. The
// transcript is append-only and its entries are frozen once pushed;
// rollbacks change history badges on the next refresh, never the bubble
// that was already rendered.

import {
  ApiError,
  CacheEntry,
  EditRecord,
  GraphEdge,
  Neighborhood,
  QueryAnswer,
  RollbackItem,
  TripleDict,
} from "./api.js";

/** The slice of the service client the console actually calls. */
export interface EditingApi {
  edit(user: string, text: string): Promise<EditRecord>;
  rollback(key: string, user: string): Promise<EditRecord>;
  history(params?: { user?: string; subject?: string }): Promise<{ entries: EditRecord[] }>;
  cache(): Promise<{ entries: CacheEntry[] }>;
  neighborhood(subject: string, n?: number): Promise<Neighborhood>;
}

export type TranscriptKind = "edit" | "generate" | "error";

export interface TranscriptEntry {
  readonly seq: number;
  readonly user: string;
  readonly utterance: string;
  readonly kind: TranscriptKind;
  readonly conflict: string; // conflict kind for edits, "" otherwise
  readonly rollbacks: readonly RollbackItem[];
  readonly edits: readonly TripleDict[];
  readonly augmentations: readonly TripleDict[];
  readonly newKeys: readonly string[];
  readonly answer: QueryAnswer | null;
  readonly alreadyPresent: boolean;
  readonly error: string | null; // inline error text; null when the call worked
}

export interface KeyBadge {
  readonly key: string;
  readonly status: string; // "Active" | "RolledBack" | "?" when the cache has no row
}

export interface HistoryRow {
  readonly requestId: number;
  readonly user: string;
  readonly kind: string;
  readonly summary: string;
  readonly keys: readonly KeyBadge[];
  readonly stale: boolean; // a rollback click on one of these keys came back 404/410
}

export interface GraphView {
  readonly subject: string;
  readonly nodes: readonly string[];
  readonly edges: readonly GraphEdge[];
  readonly empty: boolean;
}

const POLL_MS = 2000;

export class ConsoleViewModel {
  private entries: TranscriptEntry[] = [];
  private rows: HistoryRow[] = [];
  private graph: GraphView | null = null;
  private staleKeys = new Set<string>();
  private user = "console";
  private seq = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  private refreshing = false;
  private refreshError: string | null = null;

  onChange: (() => void) | null = null;

  constructor(private api: EditingApi) {}

  get activeUser(): string {
    return this.user;
  }

  /** Attribution only: nothing already rendered changes when the user does. */
  switchUser(name: string): void {
    const trimmed = name.trim();
    if (trimmed) {
      this.user = trimmed;
      this.notify();
    }
  }

  get transcript(): readonly TranscriptEntry[] {
    return this.entries;
  }

  get historyView(): readonly HistoryRow[] {
    return this.rows;
  }

  get graphView(): GraphView | null {
    return this.graph;
  }

  /** Last refresh failure, shown as a connection banner; null when healthy. */
  get lastRefreshError(): string | null {
    return this.refreshError;
  }

  async submitUtterance(text: string): Promise<TranscriptEntry> {
    let entry: TranscriptEntry;
    try {
      const record = await this.api.edit(this.user, text);
      entry = this.entryFromRecord(text, record);
    } catch (err) {
      entry = this.errorEntry(text, err);
    }
    Object.freeze(entry.rollbacks);
    Object.freeze(entry.edits);
    Object.freeze(entry.augmentations);
    Object.freeze(entry.newKeys);
    Object.freeze(entry);
    this.entries.push(entry);
    await this.refresh();
    return entry;
  }

  async rollbackFromHistory(key: string): Promise<void> {
    let failure: string | null = null;
    try {
      await this.api.rollback(key, this.user);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 404 || err.status === 410)) {
        this.staleKeys.add(key);
      } else {
        failure = errorText(err);
      }
    }
    await this.refresh();
    if (failure !== null) {
      // a successful refresh must not hide that the rollback itself failed
      this.refreshError = failure;
      this.notify();
    }
  }

  async exploreNeighborhood(subject: string, n: number): Promise<GraphView> {
    let view: GraphView;
    try {
      const hood = await this.api.neighborhood(subject, n);
      view = {
        subject: hood.subject,
        nodes: hood.nodes,
        edges: hood.edges,
        empty: hood.edges.length === 0,
      };
    } catch (err) {
      this.refreshError = errorText(err);
      view = { subject, nodes: [], edges: [], empty: true };
    }
    this.graph = Object.freeze(view);
    this.notify();
    return view;
  }

  /**
   * Pull history and cache and rebuild the rows. The two calls run one
   * after the other — the writer on the far side linearizes requests, and
   * the console never has more than one of its own in flight.
   */
  async refresh(): Promise<void> {
    if (this.refreshing) {
      return;
    }
    this.refreshing = true;
    try {
      const history = await this.api.history();
      const cache = await this.api.cache();
      const statusByKey = new Map<string, string>();
      for (const e of cache.entries) {
        statusByKey.set(e.key, e.status);
      }
      this.rows = history.entries.map((record) => this.rowFromRecord(record, statusByKey));
      this.refreshError = null;
    } catch (err) {
      this.refreshError = errorText(err);
    } finally {
      this.refreshing = false;
    }
    this.notify();
  }

  startPolling(intervalMs: number = POLL_MS): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => {
      void this.refresh();
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  // -- building blocks -----------------------------------------------------

  private entryFromRecord(text: string, record: EditRecord): TranscriptEntry {
    if (record.kind === "generate") {
      // questions produce an answer bubble and nothing else
      return {
        seq: this.seq++,
        user: this.user,
        utterance: text,
        kind: "generate",
        conflict: "",
        rollbacks: [],
        edits: [],
        augmentations: [],
        newKeys: [],
        answer: record.answer ?? null,
        alreadyPresent: false,
        error: null,
      };
    }
    if (record.kind !== "edit" || !record.plan || !Array.isArray(record.new_keys)) {
      return this.errorEntry(
        text,
        new ApiError(200, "service response is missing the edit plan", record),
      );
    }
    const plan = record.plan;
    return {
      seq: this.seq++,
      user: this.user,
      utterance: text,
      kind: "edit",
      conflict: plan.conflict ? plan.conflict.kind : "None",
      rollbacks: plan.rollbacks,
      edits: plan.edits.concat(plan.alias_edits),
      augmentations: plan.augmentations,
      newKeys: record.new_keys,
      answer: record.answer ?? null,
      alreadyPresent: record.already_present ?? false,
      error: null,
    };
  }

  private errorEntry(text: string, err: unknown): TranscriptEntry {
    return {
      seq: this.seq++,
      user: this.user,
      utterance: text,
      kind: "error",
      conflict: "",
      rollbacks: [],
      edits: [],
      augmentations: [],
      newKeys: [],
      answer: null,
      alreadyPresent: false,
      error: errorText(err),
    };
  }

  private rowFromRecord(record: EditRecord, statusByKey: Map<string, string>): HistoryRow {
    const keys = (record.new_keys ?? []).map((key) => ({
      key,
      status: statusByKey.get(key) ?? "?",
    }));
    return Object.freeze({
      requestId: record.request_id,
      user: record.user,
      kind: record.kind,
      summary: summarize(record),
      keys: Object.freeze(keys),
      stale: keys.some((k) => this.staleKeys.has(k.key)),
    });
  }

  private notify(): void {
    if (this.onChange) {
      this.onChange();
    }
  }
}

function summarize(record: EditRecord): string {
  if (record.kind === "rollback") {
    return `rollback ${record.key ?? "?"}`;
  }
  if (record.kind === "generate") {
    return record.text ?? "";
  }
  const t = record.triple;
  if (!t) {
    return record.text ?? "";
  }
  return `${t.s} ${t.r} → ${t.o}`;
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.status}: ${err.message}`;
  }
  if (err instanceof Error) {
    return err.message;
  }
  return String(err);
}
