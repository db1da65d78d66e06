// Typed client for the oneedit HTTP service. One base URL, one fetch
// wrapper; nothing is cached or derived on this side of the wire.

export interface TripleDict {
  s: string;
  r: string;
  o: string;
}

export interface ConflictReport {
  kind: "None" | "Coverage" | "Reverse" | "Both";
  incoming: TripleDict;
  existing_forward: TripleDict | null;
  existing_reverse: TripleDict | null;
}

export interface RollbackItem {
  triple: TripleDict;
  key: string | null; // null when the displaced fact came from the seed files
  reason: string;
}

export interface EditPlan {
  incoming: TripleDict;
  rollbacks: RollbackItem[];
  edits: TripleDict[];
  alias_edits: TripleDict[];
  augmentations: TripleDict[];
  conflict: ConflictReport | null;
  already_present: boolean;
}

export interface AppliedAction {
  kind: string;
  triple: TripleDict;
  key: string | null;
  source: string;
  kg_new: boolean | null;
  displaced: string | null;
}

export interface QueryAnswer {
  answer: string;
  weight: string;
  overridden: boolean;
}

export interface EditRecord {
  request_id: number;
  kind: "edit" | "generate" | "rollback";
  user: string;
  intent?: string;
  text?: string | null;
  triple?: TripleDict;
  conflict?: ConflictReport | null;
  plan?: EditPlan;
  already_present?: boolean;
  actions: AppliedAction[];
  new_keys?: string[];
  answer?: QueryAnswer | null;
  key?: string;
}

export interface QueryResult extends QueryAnswer {
  provenance: string | null;
}

export interface CacheEntry {
  key: string;
  triple: TripleDict;
  user: string;
  status: string;
  source: string;
  request_id: number;
}

export interface GraphEdge {
  source: string;
  relation: string;
  target: string;
}

export interface Neighborhood {
  subject: string;
  triples: TripleDict[];
  nodes: string[];
  edges: GraphEdge[];
}

export interface Health {
  status: string;
  triples: number;
  cache_entries: number;
  active_entries: number;
  requests: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
    readonly body: unknown = null,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export class ServiceClient {
  private baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const raw = await res.text();
    let parsed: unknown = null;
    if (raw) {
      try {
        parsed = JSON.parse(raw);
      } catch {
        if (res.ok) {
          throw new ApiError(res.status, "service returned a body that is not JSON", raw);
        }
        // non-JSON error bodies still carry a useful status code
      }
    }
    if (!res.ok) {
      const detail =
        parsed && typeof parsed === "object" && "detail" in parsed
          ? String((parsed as { detail: unknown }).detail)
          : `request failed with status ${res.status}`;
      throw new ApiError(res.status, detail, parsed ?? raw);
    }
    if (parsed === null || typeof parsed !== "object") {
      throw new ApiError(res.status, "service returned an empty or non-object body", parsed);
    }
    return parsed as T;
  }

  edit(user: string, text: string): Promise<EditRecord> {
    return this.request("POST", "/api/edit", { user, text });
  }

  editTriple(user: string, triple: TripleDict): Promise<EditRecord> {
    return this.request("POST", "/api/edit", { user, triple });
  }

  query(subject: string, relation: string): Promise<QueryResult> {
    return this.request("POST", "/api/query", { subject, relation });
  }

  rollback(key: string, user: string): Promise<EditRecord> {
    return this.request("POST", `/api/rollback/${encodeURIComponent(key)}`, { user });
  }

  history(params: { user?: string; subject?: string } = {}): Promise<{ entries: EditRecord[] }> {
    const q = new URLSearchParams();
    if (params.user) q.set("user", params.user);
    if (params.subject) q.set("subject", params.subject);
    const suffix = q.size > 0 ? `?${q.toString()}` : "";
    return this.request("GET", `/api/history${suffix}`);
  }

  cache(): Promise<{ entries: CacheEntry[] }> {
    return this.request("GET", "/api/cache");
  }

  neighborhood(subject: string, n = 10): Promise<Neighborhood> {
    const q = new URLSearchParams({ subject, n: String(n) });
    return this.request("GET", `/api/graph/neighborhood?${q.toString()}`);
  }

  health(): Promise<Health> {
    return this.request("GET", "/api/health");
  }
}
