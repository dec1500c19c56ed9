/**
 * Typed client for the workbench JSON API.
 *
 * Every read accepts an AbortSignal so the explorer can cancel in-flight
 * requests when the selection changes. The client does no math on the
 * payloads; statistics arrive fully computed from the service.
 */

export interface SimulationInfo {
  simulation_id: number;
  building_id: number;
  weather_file_location: string;
  time_resolution: number;
  schedule_name: string;
}

export interface VariableInfo {
  variable_id: number;
  variable_name: string;
  kind: "zone" | "surface" | "node" | "schedule" | "site";
  entity: string | null;
  unit: string;
  frequency: string;
  aggregated: boolean;
}

export interface SeriesData {
  variable_id: number;
  variable_name: string;
  kind: string;
  entity: string | null;
  unit: string;
  label: string;
  timestamps: string[];
  values: number[];
}

export interface SeriesPayload {
  simulation_id: number;
  series: SeriesData[];
}

export interface HistogramBin {
  lo: number;
  hi: number;
  count: number;
}

export interface DistributionPayload {
  simulation_id: number;
  variable_id: number;
  variable_name: string;
  entity: string | null;
  unit: string;
  label: string;
  count: number;
  nonfinite_count: number;
  mean: number;
  variance: number;
  min: number;
  max: number;
  range: number;
  histogram: HistogramBin[];
}

export interface ScatterPayload {
  simulation_id: number;
  x: { variable_id: number; variable_name: string; entity: string | null; unit: string };
  y: { variable_id: number; variable_name: string; entity: string | null; unit: string };
  timestamps: string[];
  x_values: number[];
  y_values: number[];
}

export interface JobStatus {
  job_id: string;
  phase: "pending" | "running" | "done" | "failed";
  progress: number;
  error?: string;
  result?: Record<string, unknown>;
}

export interface AggregateRequest {
  simulation_id: number;
  method: "simple" | "area_weighted" | "volume_weighted";
  groups: { name: string; zones: string[] }[];
  variables?: string[];
}

export interface DateRange {
  start: string | null;
  end: string | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

function rangeParams(range: DateRange): Record<string, string> {
  const params: Record<string, string> = {};
  if (range.start) params.start = range.start;
  if (range.end) params.end = range.end;
  return params;
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(
    path: string,
    params: Record<string, string> = {},
    init: RequestInit = {},
  ): Promise<T> {
    const query = new URLSearchParams(params).toString();
    const url = `${this.base}${path}${query ? `?${query}` : ""}`;
    const response = await this.fetchFn(url, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listSimulations(signal?: AbortSignal): Promise<SimulationInfo[]> {
    return this.request("/api/simulations", {}, { signal });
  }

  listVariables(simulation: number, signal?: AbortSignal): Promise<VariableInfo[]> {
    return this.request(`/api/simulations/${simulation}/variables`, {}, { signal });
  }

  series(
    simulation: number,
    variables: number[],
    range: DateRange,
    signal?: AbortSignal,
  ): Promise<SeriesPayload> {
    return this.request(
      "/api/series",
      { sim: String(simulation), vars: variables.join(","), ...rangeParams(range) },
      { signal },
    );
  }

  distribution(
    simulation: number,
    variable: number,
    range: DateRange,
    signal?: AbortSignal,
  ): Promise<DistributionPayload> {
    return this.request(
      "/api/stats/distribution",
      { sim: String(simulation), var: String(variable), ...rangeParams(range) },
      { signal },
    );
  }

  scatter(
    simulation: number,
    x: number,
    y: number,
    range: DateRange,
    signal?: AbortSignal,
  ): Promise<ScatterPayload> {
    return this.request(
      "/api/stats/scatter",
      { sim: String(simulation), x: String(x), y: String(y), ...rangeParams(range) },
      { signal },
    );
  }

  aggregate(request: AggregateRequest): Promise<JobStatus> {
    return this.request("/api/aggregate", {}, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request(`/api/jobs/${jobId}`);
  }

  /** Poll a job until done; rejects on failure or timeout. */
  async pollJob(
    jobId: string,
    options: { intervalMs?: number; timeoutMs?: number; onUpdate?: (s: JobStatus) => void } = {},
  ): Promise<JobStatus> {
    const interval = options.intervalMs ?? 250;
    const deadline = Date.now() + (options.timeoutMs ?? 60_000);
    for (;;) {
      const status = await this.job(jobId);
      options.onUpdate?.(status);
      if (status.phase === "done") return status;
      if (status.phase === "failed") {
        throw new ApiError(500, status.error ?? "job failed");
      }
      if (Date.now() > deadline) throw new ApiError(504, `job ${jobId} timed out`);
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
