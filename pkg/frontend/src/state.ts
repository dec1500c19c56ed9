/**
 * Explorer state, shareable via the URL.
 *
 * Selection (simulation, variables, date range, active view) round-trips
 * through the query string so a refresh or a shared link reproduces the
 * session; the draft aggregation spec persists in localStorage instead,
 * since half-typed group definitions don't belong in a share link.
 */

export type ViewKind = "distribution" | "scatter" | "timeseries";

export interface DraftGroup {
  name: string;
  zones: string[];
}

export interface DraftAggregation {
  method: "simple" | "area_weighted" | "volume_weighted";
  groups: DraftGroup[];
}

export interface ExplorerState {
  simulation: number | null;
  variables: number[];
  start: string | null;
  end: string | null;
  view: ViewKind;
  draft: DraftAggregation;
}

export const DEFAULT_DRAFT: DraftAggregation = { method: "area_weighted", groups: [] };

export const DEFAULT_STATE: ExplorerState = {
  simulation: null,
  variables: [],
  start: null,
  end: null,
  view: "timeseries",
  draft: DEFAULT_DRAFT,
};

const VIEWS: ViewKind[] = ["distribution", "scatter", "timeseries"];
const DRAFT_KEY = "epworkbench.draft";

/** Required selection size per view; null means any non-empty selection. */
export function requiredSelection(view: ViewKind): number | null {
  if (view === "distribution") return 1;
  if (view === "scatter") return 2;
  return null;
}

/** Human-readable invariant violation for the current selection, if any. */
export function selectionIssue(state: ExplorerState): string | null {
  if (state.simulation === null) return "Pick a simulation to begin.";
  const needed = requiredSelection(state.view);
  if (needed === null) {
    return state.variables.length === 0 ? "Select at least one variable." : null;
  }
  if (state.variables.length !== needed) {
    const noun = needed === 1 ? "exactly 1 variable" : `exactly ${needed} variables`;
    return `The ${state.view} view needs ${noun} selected (have ${state.variables.length}).`;
  }
  return null;
}

export function stateToQuery(state: ExplorerState): string {
  const params = new URLSearchParams();
  if (state.simulation !== null) params.set("sim", String(state.simulation));
  if (state.variables.length) params.set("vars", state.variables.join(","));
  if (state.start) params.set("start", state.start);
  if (state.end) params.set("end", state.end);
  params.set("view", state.view);
  return params.toString();
}

export function stateFromQuery(query: string, draft: DraftAggregation = DEFAULT_DRAFT): ExplorerState {
  const params = new URLSearchParams(query);
  const sim = params.get("sim");
  const vars = (params.get("vars") ?? "")
    .split(",")
    .map((v) => Number.parseInt(v, 10))
    .filter((v) => Number.isFinite(v) && v > 0);
  const view = params.get("view") as ViewKind | null;
  return {
    simulation: sim && /^\d+$/.test(sim) ? Number.parseInt(sim, 10) : null,
    variables: [...new Set(vars)],
    start: params.get("start"),
    end: params.get("end"),
    view: view && VIEWS.includes(view) ? view : "timeseries",
    draft,
  };
}

export function loadDraft(storage: Storage): DraftAggregation {
  try {
    const raw = storage.getItem(DRAFT_KEY);
    if (!raw) return DEFAULT_DRAFT;
    const parsed = JSON.parse(raw) as DraftAggregation;
    if (!parsed || !Array.isArray(parsed.groups)) return DEFAULT_DRAFT;
    return parsed;
  } catch {
    return DEFAULT_DRAFT;
  }
}

export function saveDraft(storage: Storage, draft: DraftAggregation): void {
  storage.setItem(DRAFT_KEY, JSON.stringify(draft));
}

type Listener = (state: ExplorerState) => void;

/**
 * Single source of truth for explorer state.  Updates synchronously
 * notify subscribers and mirror the shareable part into the URL.
 */
export class StateStore {
  private state: ExplorerState;
  private listeners = new Set<Listener>();

  constructor(
    private readonly win: Pick<Window, "history" | "location"> & { localStorage: Storage },
  ) {
    this.state = stateFromQuery(win.location.search, loadDraft(win.localStorage));
  }

  get(): ExplorerState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  update(patch: Partial<ExplorerState>): void {
    this.state = { ...this.state, ...patch };
    if (patch.draft) saveDraft(this.win.localStorage, patch.draft);
    const query = stateToQuery(this.state);
    this.win.history.replaceState(null, "", `${this.win.location.pathname}?${query}`);
    for (const listener of this.listeners) listener(this.state);
  }
}
