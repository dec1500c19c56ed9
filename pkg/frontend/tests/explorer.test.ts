/**
 * End-to-end explorer workflow against the service wire contract
 * (jsdom-driven DOM; fetch implemented by FakeService):
 *   (a) list the simulation,
 *   (b) build and submit a single-group area-weighted aggregation and
 *       observe job completion,
 *   (c) render all three plot types for a 1-day range,
 *   (d) download a PNG.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { bootstrap } from "../src/main.js";
import { ExplorerApp } from "../src/views.js";
import { FakeService, ZONES } from "./fake-service.js";
import { RecordingContext } from "./recording-context.js";

const DAY_RANGE = { start: "2023-01-01T00:05:00", end: "2023-01-02T00:00:00" };

async function flush(turns = 8): Promise<void> {
  for (let i = 0; i < turns; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

async function until(check: () => boolean, timeoutMs = 3000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!check()) {
    if (Date.now() > deadline) throw new Error("condition not met in time");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

interface Harness {
  app: ExplorerApp;
  service: FakeService;
  ctx: RecordingContext;
  root: HTMLElement;
}

async function launch(): Promise<Harness> {
  const service = new FakeService();
  const ctx = new RecordingContext();
  const app = await bootstrap(window, new ApiClient("", service.fetch), {
    chart: { createContext: () => ctx },
  });
  await flush();
  return { app, service, ctx, root: app.root };
}

function selectSimulation(root: HTMLElement): void {
  (root.querySelector("ul.simulations button") as HTMLButtonElement).click();
}

function setSelection(root: HTMLElement, labelsWanted: number): number[] {
  const boxes = [...root.querySelectorAll<HTMLInputElement>("ul.variables input")];
  const chosen: number[] = [];
  for (const box of boxes) {
    const want = chosen.length < labelsWanted;
    if (box.checked !== want && (want || box.checked)) {
      box.checked = want;
      box.dispatchEvent(new Event("change", { bubbles: true }));
    }
    if (want) chosen.push(Number(box.value));
  }
  return chosen;
}

function setRange(root: HTMLElement): void {
  const start = root.querySelector<HTMLInputElement>("input.start")!;
  const end = root.querySelector<HTMLInputElement>("input.end")!;
  start.value = DAY_RANGE.start;
  start.dispatchEvent(new Event("change", { bubbles: true }));
  end.value = DAY_RANGE.end;
  end.dispatchEvent(new Event("change", { bubbles: true }));
}

function clickTab(root: HTMLElement, view: string): void {
  const tab = [...root.querySelectorAll<HTMLButtonElement>(".tabs .tab")].find(
    (button) => button.textContent === view,
  )!;
  tab.click();
}

beforeEach(() => {
  document.body.innerHTML = '<main id="app"></main>';
  window.history.replaceState(null, "", "/");
  window.localStorage.clear();
  (HTMLCanvasElement.prototype as { toDataURL: () => string }).toDataURL = () =>
    "data:image/png;base64,RkFLRVBORw==";
});

describe("explorer workflow", () => {
  it("(a) lists the simulation from the catalog", async () => {
    const { root } = await launch();
    const entries = [...root.querySelectorAll("ul.simulations button")];
    expect(entries).toHaveLength(1);
    expect(entries[0].textContent).toContain("seattle.epw");
  });

  it("(b) submits an area-weighted aggregation and sees the job finish", async () => {
    const { root } = await launch();
    selectSimulation(root);
    await flush();

    const zonePicker = root.querySelector<HTMLSelectElement>("select.zones")!;
    expect([...zonePicker.options].map((o) => o.value)).toEqual(ZONES);
    for (const option of zonePicker.options) option.selected = true;
    root.querySelector<HTMLInputElement>("input.group-name")!.value = "AggZone";
    root.querySelector<HTMLSelectElement>("select.method")!.value = "area_weighted";

    root.querySelector<HTMLButtonElement>("button.aggregate")!.click();
    const status = root.querySelector(".job-status")!;
    await until(() => /done/.test(status.textContent ?? ""));

    // job completion refreshed the catalog with the aggregated series
    const labels = [...root.querySelectorAll("ul.variables label")].map((l) => l.textContent);
    expect(labels.some((label) => label?.includes("AggZone"))).toBe(true);
  });

  it("(c) renders all three plot types for a 1-day range", async () => {
    const { root, ctx, service } = await launch();
    selectSimulation(root);
    await flush();
    setRange(root);
    await flush();

    // timeseries: three zones overlaid
    clickTab(root, "timeseries");
    setSelection(root, 3);
    await until(() => ctx.count("stroke") >= 3 && ctx.count("lineTo") > 0);
    expect(root.querySelector(".stats-readout")!.textContent).toContain("288 points");

    // distribution: exactly one variable, histogram bars + verbatim API stats
    setSelection(root, 1);
    clickTab(root, "distribution");
    await until(() => ctx.count("fillRect") >= 3);
    const readout = root.querySelector(".stats-readout")!.textContent!;
    expect(readout).toContain("mean=123.456");
    expect(readout).toContain("variance=7.89000");

    // scatter: exactly two variables, one marker per pair
    setSelection(root, 2);
    clickTab(root, "scatter");
    await until(() => ctx.count("arc") === 288);

    // every plot request carried the 1-day range
    const plotRequests = service.requests.filter((r) =>
      /\/api\/(series|stats)/.test(r),
    );
    expect(plotRequests.length).toBeGreaterThan(0);
    for (const request of plotRequests.slice(-3)) {
      expect(request).toContain("start=2023-01-01T00%3A05%3A00");
      expect(request).toContain("end=2023-01-02T00%3A00%3A00");
    }
  });

  it("(d) downloads the current figure as a PNG", async () => {
    const { root } = await launch();
    selectSimulation(root);
    await flush();
    setSelection(root, 1);
    clickTab(root, "distribution");
    await flush();

    const link = root.querySelector<HTMLAnchorElement>("a.download")!;
    link.addEventListener("click", (event) => event.preventDefault()); // block jsdom navigation
    link.click();
    expect(link.href).toMatch(/^data:image\/png/);
    expect(link.download).toBe("epworkbench-distribution.png");
  });

  it("shows selection-invariant violations inline instead of fetching", async () => {
    const { root, service } = await launch();
    selectSimulation(root);
    await flush();
    setSelection(root, 3);
    clickTab(root, "scatter");
    await flush();
    expect(root.querySelector(".stats-readout")!.textContent).toMatch(/exactly 2 variables/);
    const scatterRequests = service.requests.filter((r) => r.includes("/api/stats/scatter"));
    expect(scatterRequests).toHaveLength(0);
  });

  it("cancels in-flight requests when the selection changes", async () => {
    const { root, service } = await launch();
    selectSimulation(root);
    await flush();
    clickTab(root, "timeseries");
    // two rapid selection changes: the first series request gets aborted
    const boxes = [...root.querySelectorAll<HTMLInputElement>("ul.variables input")];
    boxes[0].checked = true;
    boxes[0].dispatchEvent(new Event("change", { bubbles: true }));
    boxes[1].checked = true;
    boxes[1].dispatchEvent(new Event("change", { bubbles: true }));
    await flush(20);
    expect(service.aborted.some((r) => r.includes("/api/series"))).toBe(true);
    expect(root.querySelector(".error-banner")!.hidden).toBe(true); // abort is not an error
  });

  it("surfaces API failures inline with a retry control", async () => {
    const service = new FakeService();
    let failuresLeft = 1;
    const failingFetch: typeof service.fetch = async (input, init) => {
      const url = String(input);
      if (url.includes("/api/stats/distribution") && failuresLeft > 0) {
        failuresLeft--;
        return new Response(JSON.stringify({ detail: "boom" }), { status: 500 });
      }
      return service.fetch(input, init);
    };
    const ctx = new RecordingContext();
    const app = await bootstrap(window, new ApiClient("", failingFetch), {
      chart: { createContext: () => ctx },
    });
    await flush();
    selectSimulation(app.root);
    await flush();
    setSelection(app.root, 1);
    clickTab(app.root, "distribution");
    await until(() => !app.root.querySelector<HTMLElement>(".error-banner")!.hidden);
    expect(app.root.querySelector(".error-text")!.textContent).toContain("boom");

    app.root.querySelector<HTMLButtonElement>("button.retry")!.click();
    await until(() => ctx.count("fillRect") >= 2);
    expect(app.root.querySelector<HTMLElement>(".error-banner")!.hidden).toBe(true);
  });

  it("restores the session from the URL on reload", async () => {
    const first = await launch();
    selectSimulation(first.root);
    await flush();
    setSelection(first.root, 1);
    clickTab(first.root, "distribution");
    await flush();
    const savedQuery = window.location.search;

    document.body.innerHTML = '<main id="app"></main>';
    window.history.replaceState(null, "", `/${savedQuery}`);
    const second = await launch();
    await until(() => second.ctx.count("fillRect") >= 2);
    const checked = [...second.root.querySelectorAll<HTMLInputElement>("ul.variables input")]
      .filter((box) => box.checked);
    expect(checked).toHaveLength(1);
  });
});
