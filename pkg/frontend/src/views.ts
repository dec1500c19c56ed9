/**
 * DOM views: catalog browser, aggregation builder, and plot explorer.
 *
 * The explorer owns one AbortController per refresh; changing the
 * selection cancels whatever was in flight.  All statistics shown come
 * straight from the API payloads — nothing is recomputed client-side.
 */

import { ApiClient, ApiError, VariableInfo } from "./api.js";
import { Chart, ChartData, ChartOptions } from "./charts.js";
import { ExplorerState, selectionIssue, StateStore, ViewKind } from "./state.js";

const VIEWS: ViewKind[] = ["distribution", "scatter", "timeseries"];

function el<K extends keyof HTMLElementTagNameMap>(
  document: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function variableLabel(variable: VariableInfo): string {
  const name = variable.entity
    ? `${variable.entity} · ${variable.variable_name}`
    : variable.variable_name;
  return variable.unit ? `${name} [${variable.unit}]` : name;
}

export interface ExplorerOptions {
  chart?: ChartOptions;
  pollIntervalMs?: number;
}

export class ExplorerApp {
  readonly root: HTMLElement;
  private readonly document: Document;
  private readonly chart: Chart;
  private inflight: AbortController | null = null;
  private variables: VariableInfo[] = [];

  private readonly simulationList: HTMLUListElement;
  private readonly variableList: HTMLUListElement;
  private readonly errorBanner: HTMLDivElement;
  private readonly retryButton: HTMLButtonElement;
  private readonly statsReadout: HTMLDivElement;
  private readonly jobStatus: HTMLDivElement;
  private readonly startInput: HTMLInputElement;
  private readonly endInput: HTMLInputElement;
  private readonly viewButtons = new Map<ViewKind, HTMLButtonElement>();
  private readonly groupNameInput: HTMLInputElement;
  private readonly methodSelect: HTMLSelectElement;
  private readonly zonePicker: HTMLSelectElement;
  private readonly aggregateButton: HTMLButtonElement;
  private readonly downloadLink: HTMLAnchorElement;
  private lastError: (() => void) | null = null;

  constructor(
    document: Document,
    private readonly api: ApiClient,
    private readonly store: StateStore,
    options: ExplorerOptions = {},
  ) {
    this.document = document;
    this.root = el(document, "div", "explorer");

    // -- catalog --------------------------------------------------
    const catalog = el(document, "section", "catalog");
    catalog.append(el(document, "h2", undefined, "Simulations"));
    this.simulationList = el(document, "ul", "simulations");
    catalog.append(this.simulationList);

    catalog.append(el(document, "h2", undefined, "Variables"));
    this.variableList = el(document, "ul", "variables");
    catalog.append(this.variableList);

    // -- aggregation builder ---------------------------------------
    const builder = el(document, "section", "builder");
    builder.append(el(document, "h2", undefined, "Aggregation"));
    this.groupNameInput = el(document, "input", "group-name");
    this.groupNameInput.placeholder = "Aggregated zone name";
    this.methodSelect = el(document, "select", "method");
    for (const method of ["simple", "area_weighted", "volume_weighted"]) {
      const option = el(document, "option", undefined, method);
      option.value = method;
      this.methodSelect.append(option);
    }
    this.methodSelect.value = this.store.get().draft.method;
    this.zonePicker = el(document, "select", "zones");
    this.zonePicker.multiple = true;
    this.aggregateButton = el(document, "button", "aggregate", "Aggregate");
    this.aggregateButton.addEventListener("click", () => void this.submitAggregation());
    this.jobStatus = el(document, "div", "job-status");
    builder.append(this.groupNameInput, this.methodSelect, this.zonePicker, this.aggregateButton, this.jobStatus);

    // -- plot explorer ----------------------------------------------
    const explorer = el(document, "section", "plots");
    const tabs = el(document, "div", "tabs");
    for (const view of VIEWS) {
      const button = el(document, "button", "tab", view);
      button.addEventListener("click", () => this.store.update({ view }));
      this.viewButtons.set(view, button);
      tabs.append(button);
    }
    const rangeRow = el(document, "div", "range");
    this.startInput = el(document, "input", "start");
    this.startInput.placeholder = "start (ISO-8601)";
    this.endInput = el(document, "input", "end");
    this.endInput.placeholder = "end (ISO-8601)";
    const applyRange = () => {
      this.store.update({
        start: this.startInput.value || null,
        end: this.endInput.value || null,
      });
    };
    this.startInput.addEventListener("change", applyRange);
    this.endInput.addEventListener("change", applyRange);
    rangeRow.append(this.startInput, this.endInput);

    this.errorBanner = el(document, "div", "error-banner");
    this.errorBanner.hidden = true;
    this.retryButton = el(document, "button", "retry", "Retry");
    this.retryButton.addEventListener("click", () => this.lastError?.());
    this.errorBanner.append(el(document, "span", "error-text"), this.retryButton);

    this.statsReadout = el(document, "div", "stats-readout");
    this.chart = new Chart(document, options.chart);
    this.downloadLink = el(document, "a", "download", "Download PNG");
    this.downloadLink.addEventListener("click", () => {
      this.downloadLink.href = this.chart.toDataUrl();
      this.downloadLink.download = `epworkbench-${this.store.get().view}.png`;
    });

    explorer.append(tabs, rangeRow, this.errorBanner, this.statsReadout, this.chart.canvas, this.downloadLink);
    this.root.append(catalog, builder, explorer);

    this.store.subscribe(() => void this.onStateChange());
  }

  /** Load the catalog and re-apply any state carried in the URL. */
  async start(): Promise<void> {
    await this.refreshSimulations();
    await this.onStateChange();
  }

  private showError(message: string, retry: () => void): void {
    this.lastError = retry;
    this.errorBanner.hidden = false;
    (this.errorBanner.querySelector(".error-text") as HTMLElement).textContent = message;
  }

  private clearError(): void {
    this.lastError = null;
    this.errorBanner.hidden = true;
  }

  private async refreshSimulations(): Promise<void> {
    try {
      const simulations = await this.api.listSimulations();
      this.simulationList.textContent = "";
      for (const simulation of simulations) {
        const item = el(this.document, "li", "simulation");
        const button = el(
          this.document,
          "button",
          undefined,
          `#${simulation.simulation_id} · ${simulation.weather_file_location} · ${simulation.time_resolution} min`,
        );
        button.dataset.simulationId = String(simulation.simulation_id);
        button.addEventListener("click", () =>
          this.store.update({ simulation: simulation.simulation_id, variables: [] }),
        );
        item.append(button);
        this.simulationList.append(item);
      }
      this.clearError();
    } catch (error) {
      this.showError(`Failed to list simulations: ${String(error)}`, () => void this.refreshSimulations());
    }
  }

  private async refreshVariables(simulation: number): Promise<void> {
    this.variables = await this.api.listVariables(simulation);
    this.variableList.textContent = "";
    const selected = new Set(this.store.get().variables);
    for (const variable of this.variables) {
      const item = el(this.document, "li", "variable");
      const checkbox = el(this.document, "input");
      checkbox.type = "checkbox";
      checkbox.value = String(variable.variable_id);
      checkbox.checked = selected.has(variable.variable_id);
      checkbox.addEventListener("change", () => {
        const current = new Set(this.store.get().variables);
        if (checkbox.checked) {
          current.add(variable.variable_id);
        } else {
          current.delete(variable.variable_id);
        }
        this.store.update({ variables: [...current].sort((a, b) => a - b) });
      });
      const label = el(this.document, "label", undefined, variableLabel(variable));
      label.prepend(checkbox);
      item.append(label);
      this.variableList.append(item);
    }
    this.refreshZonePicker();
  }

  private refreshZonePicker(): void {
    const zones = [
      ...new Set(
        this.variables
          .filter((v) => v.kind === "zone" && !v.aggregated && v.entity)
          .map((v) => v.entity as string),
      ),
    ].sort();
    this.zonePicker.textContent = "";
    for (const zone of zones) {
      const option = el(this.document, "option", undefined, zone);
      option.value = zone;
      this.zonePicker.append(option);
    }
  }

  private async submitAggregation(): Promise<void> {
    const state = this.store.get();
    if (state.simulation === null) {
      this.jobStatus.textContent = "Pick a simulation first.";
      return;
    }
    const zones = [...this.zonePicker.selectedOptions].map((o) => o.value);
    const name = this.groupNameInput.value.trim();
    if (!name || zones.length === 0) {
      this.jobStatus.textContent = "Name the aggregated zone and select its composite zones.";
      return;
    }
    const method = this.methodSelect.value as "simple" | "area_weighted" | "volume_weighted";
    this.store.update({ draft: { method, groups: [{ name, zones }] } });
    this.jobStatus.textContent = "Submitting…";
    try {
      const job = await this.api.aggregate({
        simulation_id: state.simulation,
        method,
        groups: [{ name, zones }],
      });
      const finished = await this.api.pollJob(job.job_id, {
        intervalMs: 100,
        onUpdate: (status) => {
          if (status.phase !== "done") {
            this.jobStatus.textContent = `Job ${status.job_id}: ${status.phase}`;
          }
        },
      });
      await this.refreshVariables(state.simulation);
      this.jobStatus.textContent = `Job ${finished.job_id}: done`;
    } catch (error) {
      this.jobStatus.textContent = `Aggregation failed: ${String(error)}`;
    }
  }

  private async onStateChange(): Promise<void> {
    const state = this.store.get();
    for (const [view, button] of this.viewButtons) {
      button.classList.toggle("active", view === state.view);
    }
    this.startInput.value = state.start ?? "";
    this.endInput.value = state.end ?? "";
    for (const item of this.simulationList.querySelectorAll("button")) {
      item.classList.toggle(
        "active",
        item.dataset.simulationId === String(state.simulation ?? ""),
      );
    }
    if (state.simulation !== null && this.variableList.childElementCount === 0) {
      try {
        await this.refreshVariables(state.simulation);
      } catch (error) {
        this.showError(`Failed to list variables: ${String(error)}`, () => void this.onStateChange());
        return;
      }
    }
    await this.refreshPlot(state);
  }

  private async refreshPlot(state: ExplorerState): Promise<void> {
    this.inflight?.abort();
    const issue = selectionIssue(state);
    if (issue) {
      this.statsReadout.textContent = issue;
      return;
    }
    const controller = new AbortController();
    this.inflight = controller;
    const range = { start: state.start, end: state.end };
    const simulation = state.simulation!;
    try {
      let data: ChartData;
      if (state.view === "distribution") {
        const payload = await this.api.distribution(
          simulation, state.variables[0], range, controller.signal,
        );
        this.statsReadout.textContent =
          `${payload.label}: n=${payload.count} mean=${payload.mean.toPrecision(6)} ` +
          `variance=${payload.variance.toPrecision(6)} range=${payload.range.toPrecision(6)}`;
        data = { kind: "distribution", bins: payload.histogram, label: payload.label };
      } else if (state.view === "scatter") {
        const payload = await this.api.scatter(
          simulation, state.variables[0], state.variables[1], range, controller.signal,
        );
        this.statsReadout.textContent = `${payload.x_values.length} pairs`;
        data = {
          kind: "scatter",
          x: payload.x_values,
          y: payload.y_values,
          xLabel: payload.x.variable_name,
          yLabel: payload.y.variable_name,
        };
      } else {
        const payload = await this.api.series(
          simulation, state.variables, range, controller.signal,
        );
        this.statsReadout.textContent = payload.series
          .map((s) => `${s.label}: ${s.values.length} points`)
          .join(" · ");
        data = {
          kind: "timeseries",
          series: payload.series.map((s) => ({
            label: s.label,
            times: s.timestamps.map((t) => Date.parse(`${t}Z`)),
            values: s.values,
          })),
        };
      }
      if (controller.signal.aborted) return;
      this.clearError();
      this.chart.setData(data);
    } catch (error) {
      if (controller.signal.aborted) return; // superseded by a newer selection
      const detail = error instanceof ApiError ? error.message : String(error);
      this.showError(`Plot refresh failed: ${detail}`, () => void this.refreshPlot(this.store.get()));
    }
  }
}
