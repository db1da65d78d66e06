import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, CacheEntry, EditRecord, Neighborhood, TripleDict } from "../src/api.js";
import { ConsoleViewModel, EditingApi } from "../src/console.js";

function triple(s: string, r: string, o: string): TripleDict {
  return { s, r, o };
}

function editRecord(overrides: Partial<EditRecord> = {}): EditRecord {
  return {
    request_id: 1,
    kind: "edit",
    user: "console",
    text: "Change the President of the USA to Biden",
    triple: triple("USA", "President", "Biden"),
    conflict: null,
    plan: {
      incoming: triple("USA", "President", "Biden"),
      rollbacks: [{ triple: triple("USA", "President", "Trump"), key: null, reason: "coverage" }],
      edits: [triple("USA", "President", "Biden")],
      alias_edits: [],
      augmentations: [],
      conflict: {
        kind: "Coverage",
        incoming: triple("USA", "President", "Biden"),
        existing_forward: triple("USA", "President", "Trump"),
        existing_reverse: null,
      },
      already_present: false,
    },
    already_present: false,
    actions: [],
    new_keys: ["K1"],
    answer: { answer: "Biden", weight: "1", overridden: false },
    ...overrides,
  };
}

function cacheEntry(key: string, status: string, requestId: number): CacheEntry {
  return {
    key,
    triple: triple("USA", "President", "Biden"),
    user: "console",
    status,
    source: "primary",
    request_id: requestId,
  };
}

class FakeClient implements EditingApi {
  calls: string[] = [];
  editResult: EditRecord = editRecord();
  historyEntries: EditRecord[] = [];
  cacheEntries: CacheEntry[] = [];
  hood: Neighborhood = { subject: "USA", triples: [], nodes: ["USA"], edges: [] };
  failEdit: Error | null = null;
  failRollback: Error | null = null;
  failNeighborhood: Error | null = null;

  async edit(_user: string, _text: string): Promise<EditRecord> {
    this.calls.push("edit");
    if (this.failEdit) throw this.failEdit;
    return this.editResult;
  }

  async rollback(_key: string, _user: string): Promise<EditRecord> {
    this.calls.push("rollback");
    if (this.failRollback) throw this.failRollback;
    return { request_id: 99, kind: "rollback", user: "console", actions: [] };
  }

  async history(): Promise<{ entries: EditRecord[] }> {
    this.calls.push("history");
    return { entries: this.historyEntries };
  }

  async cache(): Promise<{ entries: CacheEntry[] }> {
    this.calls.push("cache");
    return { entries: this.cacheEntries };
  }

  async neighborhood(subject: string, _n?: number): Promise<Neighborhood> {
    this.calls.push("neighborhood");
    if (this.failNeighborhood) throw this.failNeighborhood;
    return { ...this.hood, subject };
  }
}

describe("submitUtterance", () => {
  it("renders the full trace of an edit", async () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    const entry = await vm.submitUtterance("Change the President of the USA to Biden");

    expect(entry.kind).toBe("edit");
    expect(entry.conflict).toBe("Coverage");
    expect(entry.rollbacks).toHaveLength(1);
    expect(entry.rollbacks[0].reason).toBe("coverage");
    expect(entry.edits).toEqual([triple("USA", "President", "Biden")]);
    expect(entry.augmentations).toEqual([]);
    expect(entry.newKeys).toEqual(["K1"]);
    expect(entry.answer?.answer).toBe("Biden");
    expect(entry.error).toBeNull();
    expect(vm.transcript).toHaveLength(1);
  });

  it("makes calls strictly in sequence: edit, then history, then cache", async () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    await vm.submitUtterance("Change the President of the USA to Biden");
    expect(api.calls).toEqual(["edit", "history", "cache"]);
  });

  it("shows a question as an answer bubble and nothing else", async () => {
    const api = new FakeClient();
    api.editResult = {
      request_id: 2,
      kind: "generate",
      user: "console",
      text: "What is the President of the USA?",
      actions: [],
      answer: { answer: "Biden", weight: "1", overridden: false },
    };
    const vm = new ConsoleViewModel(api);
    const entry = await vm.submitUtterance("What is the President of the USA?");

    expect(entry.kind).toBe("generate");
    expect(entry.answer?.answer).toBe("Biden");
    expect(entry.conflict).toBe("");
    expect(entry.rollbacks).toHaveLength(0);
    expect(entry.edits).toHaveLength(0);
    expect(entry.newKeys).toHaveLength(0);
  });

  it("renders service errors inline instead of throwing", async () => {
    const api = new FakeClient();
    api.failEdit = new ApiError(400, "body must include non-empty 'text' or a 'triple'");
    const vm = new ConsoleViewModel(api);
    const entry = await vm.submitUtterance("   ");

    expect(entry.kind).toBe("error");
    expect(entry.error).toContain("400");
    expect(entry.error).toContain("non-empty");
    expect(vm.transcript).toHaveLength(1);
  });

  it("turns a structurally wrong response into a visible error entry", async () => {
    const api = new FakeClient();
    api.editResult = { request_id: 3, kind: "edit", user: "console", actions: [] };
    const vm = new ConsoleViewModel(api);
    const entry = await vm.submitUtterance("Change the President of the USA to Biden");

    expect(entry.kind).toBe("error");
    expect(entry.error).toContain("missing the edit plan");
  });

  it("freezes transcript entries once pushed", async () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    const entry = await vm.submitUtterance("Change the President of the USA to Biden");

    expect(Object.isFrozen(entry)).toBe(true);
    expect(Object.isFrozen(entry.edits)).toBe(true);
    expect(Object.isFrozen(entry.rollbacks)).toBe(true);
    expect(() => {
      (entry as { conflict: string }).conflict = "None";
    }).toThrow();
  });
});

describe("historyView", () => {
  it("joins audit records with cache statuses into badges", async () => {
    const api = new FakeClient();
    api.historyEntries = [
      editRecord({ request_id: 1, new_keys: ["K1"] }),
      editRecord({ request_id: 2, new_keys: ["K2"], triple: triple("France", "President", "Macron") }),
    ];
    api.cacheEntries = [cacheEntry("K1", "RolledBack", 1), cacheEntry("K2", "Active", 2)];
    const vm = new ConsoleViewModel(api);
    await vm.refresh();

    expect(vm.historyView).toHaveLength(2);
    expect(vm.historyView[0].keys).toEqual([{ key: "K1", status: "RolledBack" }]);
    expect(vm.historyView[1].keys).toEqual([{ key: "K2", status: "Active" }]);
    expect(vm.historyView[1].summary).toBe("France President → Macron");
    expect(vm.historyView[0].stale).toBe(false);
  });

  it.each([404, 410])("marks a row stale when rollback answers %i", async (status) => {
    const api = new FakeClient();
    api.historyEntries = [editRecord({ request_id: 1, new_keys: ["K1"] })];
    api.cacheEntries = [cacheEntry("K1", "Active", 1)];
    api.failRollback = new ApiError(status, "gone");
    const vm = new ConsoleViewModel(api);
    await vm.rollbackFromHistory("K1");

    expect(api.calls).toEqual(["rollback", "history", "cache"]);
    expect(vm.historyView[0].stale).toBe(true);
  });

  it("reports unexpected rollback failures without throwing", async () => {
    const api = new FakeClient();
    api.failRollback = new ApiError(500, "writer is wedged");
    const vm = new ConsoleViewModel(api);
    await vm.rollbackFromHistory("K1");

    expect(vm.lastRefreshError).toContain("500");
    expect(vm.historyView).toEqual([]);
  });
});

describe("user switcher", () => {
  it("changes attribution for later entries and nothing else", async () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    const first = await vm.submitUtterance("Change the President of the USA to Biden");
    expect(first.user).toBe("console");

    vm.switchUser("alice");
    expect(vm.activeUser).toBe("alice");
    expect(vm.transcript[0].user).toBe("console");

    const second = await vm.submitUtterance("Change the President of France to Macron");
    expect(second.user).toBe("alice");
  });

  it("ignores a blank name", () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    vm.switchUser("   ");
    expect(vm.activeUser).toBe("console");
  });
});

describe("exploreNeighborhood", () => {
  it("keeps nodes and edges exactly as returned", async () => {
    const api = new FakeClient();
    api.hood = {
      subject: "USA",
      triples: [],
      nodes: ["Brazil", "France", "Japan", "USA"],
      edges: [
        { source: "USA", relation: "ally", target: "Brazil" },
        { source: "USA", relation: "ally", target: "France" },
        { source: "USA", relation: "ally", target: "Japan" },
      ],
    };
    const vm = new ConsoleViewModel(api);
    const view = await vm.exploreNeighborhood("USA", 10);

    expect(view.nodes).toEqual(["Brazil", "France", "Japan", "USA"]);
    expect(view.edges).toHaveLength(3);
    expect(view.empty).toBe(false);
    expect(vm.graphView).toBe(view);
  });

  it("flags an empty neighborhood", async () => {
    const api = new FakeClient();
    api.hood = { subject: "Atlantis", triples: [], nodes: ["Atlantis"], edges: [] };
    const vm = new ConsoleViewModel(api);
    const view = await vm.exploreNeighborhood("Atlantis", 10);

    expect(view.empty).toBe(true);
    expect(view.nodes).toEqual(["Atlantis"]);
  });

  it("degrades to an empty view when the call fails", async () => {
    const api = new FakeClient();
    api.failNeighborhood = new ApiError(422, "missing subject");
    const vm = new ConsoleViewModel(api);
    const view = await vm.exploreNeighborhood("USA", 10);

    expect(view.empty).toBe(true);
    expect(vm.lastRefreshError).toContain("422");
  });
});

describe("polling", () => {
  afterEach(() => {
    vi.useRealTimers();
  });

  it("refreshes every interval until stopped", async () => {
    vi.useFakeTimers();
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    vm.startPolling();
    expect(api.calls).toEqual([]);

    await vi.advanceTimersByTimeAsync(2000);
    expect(api.calls).toEqual(["history", "cache"]);
    await vi.advanceTimersByTimeAsync(2000);
    expect(api.calls).toEqual(["history", "cache", "history", "cache"]);

    vm.stopPolling();
    await vi.advanceTimersByTimeAsync(6000);
    expect(api.calls).toHaveLength(4);
  });

  it("does not double-schedule when started twice", async () => {
    vi.useFakeTimers();
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    vm.startPolling();
    vm.startPolling();
    await vi.advanceTimersByTimeAsync(2000);
    expect(api.calls).toEqual(["history", "cache"]);
    vm.stopPolling();
  });

  it("notifies the change hook after each refresh", async () => {
    const api = new FakeClient();
    const vm = new ConsoleViewModel(api);
    let pings = 0;
    vm.onChange = () => {
      pings += 1;
    };
    await vm.refresh();
    expect(pings).toBe(1);
    await vm.submitUtterance("Change the President of the USA to Biden");
    expect(pings).toBe(2);
  });
});
