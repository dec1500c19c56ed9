/**
 * Canvas renderers for the three plot types, with drag-zoom and pan.
 *
 * No charting dependency: the three figures here are small enough that a
 * hand-rolled renderer stays lighter than a library and keeps the bundle
 * dependency-free.  Interaction model: drag a horizontal selection to
 * zoom into it, shift-drag to pan, double-click to reset.  The rendering
 * context is injectable so tests can record draw operations under jsdom
 * (which has no real 2D canvas).
 */

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  textAlign: CanvasTextAlign;
  textBaseline: CanvasTextBaseline;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
}

export interface Domain {
  min: number;
  max: number;
}

export interface DistributionChartData {
  kind: "distribution";
  bins: { lo: number; hi: number; count: number }[];
  label: string;
}

export interface ScatterChartData {
  kind: "scatter";
  x: number[];
  y: number[];
  xLabel: string;
  yLabel: string;
}

export interface TimeseriesChartData {
  kind: "timeseries";
  series: { label: string; times: number[]; values: number[] }[];
}

export type ChartData = DistributionChartData | ScatterChartData | TimeseriesChartData;

const PALETTE = ["#2b6cb0", "#c05621", "#2f855a", "#6b46c1", "#b83280", "#975a16"];
const MARGIN = { left: 56, right: 16, top: 12, bottom: 30 };

function pad(domain: Domain): Domain {
  if (domain.min === domain.max) {
    const span = Math.abs(domain.min) || 1;
    return { min: domain.min - 0.05 * span, max: domain.max + 0.05 * span };
  }
  return domain;
}

function dataDomainX(data: ChartData): Domain {
  if (data.kind === "distribution") {
    return pad({ min: data.bins[0]?.lo ?? 0, max: data.bins[data.bins.length - 1]?.hi ?? 1 });
  }
  if (data.kind === "scatter") {
    return pad({ min: Math.min(...data.x), max: Math.max(...data.x) });
  }
  const times = data.series.flatMap((s) => [s.times[0], s.times[s.times.length - 1]]);
  return pad({ min: Math.min(...times), max: Math.max(...times) });
}

function dataDomainY(data: ChartData, xDomain: Domain): Domain {
  if (data.kind === "distribution") {
    return pad({ min: 0, max: Math.max(1, ...data.bins.map((b) => b.count)) });
  }
  const values: number[] = [];
  if (data.kind === "scatter") {
    for (let i = 0; i < data.x.length; i++) {
      if (data.x[i] >= xDomain.min && data.x[i] <= xDomain.max) values.push(data.y[i]);
    }
  } else {
    for (const s of data.series) {
      for (let i = 0; i < s.times.length; i++) {
        if (s.times[i] >= xDomain.min && s.times[i] <= xDomain.max) values.push(s.values[i]);
      }
    }
  }
  if (!values.length) return { min: 0, max: 1 };
  return pad({ min: Math.min(...values), max: Math.max(...values) });
}

function formatTick(value: number, isTime: boolean): string {
  if (!isTime) {
    if (value !== 0 && (Math.abs(value) >= 1e5 || Math.abs(value) < 1e-3)) {
      return value.toExponential(1);
    }
    return String(Math.round(value * 1000) / 1000);
  }
  const date = new Date(value);
  const mm = String(date.getUTCMonth() + 1).padStart(2, "0");
  const dd = String(date.getUTCDate()).padStart(2, "0");
  const hh = String(date.getUTCHours()).padStart(2, "0");
  const mi = String(date.getUTCMinutes()).padStart(2, "0");
  return `${mm}/${dd} ${hh}:${mi}`;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  createContext?: (canvas: HTMLCanvasElement) => Ctx2D | null;
}

/** One canvas-backed figure; re-renders on data or domain changes. */
export class Chart {
  readonly canvas: HTMLCanvasElement;
  private ctx: Ctx2D | null;
  private data: ChartData | null = null;
  private xDomain: Domain | null = null; // null = fit to data
  private drag: { startPx: number; shift: boolean; moved: boolean } | null = null;
  renderCount = 0;

  constructor(document: Document, options: ChartOptions = {}) {
    this.canvas = document.createElement("canvas");
    this.canvas.width = options.width ?? 840;
    this.canvas.height = options.height ?? 360;
    this.canvas.className = "chart";
    const create = options.createContext ?? ((c) => c.getContext("2d") as Ctx2D | null);
    this.ctx = create(this.canvas);
    this.canvas.addEventListener("mousedown", (e) => this.onDown(e as MouseEvent));
    this.canvas.addEventListener("mouseup", (e) => this.onUp(e as MouseEvent));
    this.canvas.addEventListener("dblclick", () => this.resetZoom());
  }

  setData(data: ChartData): void {
    this.data = data;
    this.xDomain = null;
    this.render();
  }

  currentXDomain(): Domain | null {
    if (this.xDomain) return this.xDomain;
    return this.data ? dataDomainX(this.data) : null;
  }

  /** Narrow the x-domain to [lo, hi] (zoom). */
  zoomTo(lo: number, hi: number): void {
    if (lo >= hi) return;
    this.xDomain = { min: lo, max: hi };
    this.render();
  }

  panBy(fraction: number): void {
    const domain = this.currentXDomain();
    if (!domain) return;
    const span = domain.max - domain.min;
    this.xDomain = { min: domain.min + fraction * span, max: domain.max + fraction * span };
    this.render();
  }

  resetZoom(): void {
    this.xDomain = null;
    this.render();
  }

  toDataUrl(): string {
    return this.canvas.toDataURL("image/png");
  }

  private plotWidth(): number {
    return this.canvas.width - MARGIN.left - MARGIN.right;
  }

  private pxToX(px: number): number {
    const domain = this.currentXDomain();
    if (!domain) return 0;
    const frac = (px - MARGIN.left) / this.plotWidth();
    return domain.min + frac * (domain.max - domain.min);
  }

  private onDown(event: MouseEvent): void {
    this.drag = { startPx: event.offsetX, shift: event.shiftKey, moved: false };
  }

  private onUp(event: MouseEvent): void {
    if (!this.drag) return;
    const { startPx, shift } = this.drag;
    this.drag = null;
    const delta = event.offsetX - startPx;
    if (Math.abs(delta) < 4) return; // a click, not a drag
    if (shift) {
      this.panBy(-delta / this.plotWidth());
    } else {
      const a = this.pxToX(Math.min(startPx, event.offsetX));
      const b = this.pxToX(Math.max(startPx, event.offsetX));
      this.zoomTo(a, b);
    }
  }

  render(): void {
    const ctx = this.ctx;
    if (!ctx || !this.data) return;
    this.renderCount++;
    const { width, height } = this.canvas;
    const xDomain = this.currentXDomain()!;
    const yDomain = dataDomainY(this.data, xDomain);
    const plotW = width - MARGIN.left - MARGIN.right;
    const plotH = height - MARGIN.top - MARGIN.bottom;
    const px = (x: number) => MARGIN.left + ((x - xDomain.min) / (xDomain.max - xDomain.min)) * plotW;
    const py = (y: number) => MARGIN.top + plotH - ((y - yDomain.min) / (yDomain.max - yDomain.min)) * plotH;

    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(0, 0, width, height);
    ctx.strokeStyle = "#cbd5e0";
    ctx.lineWidth = 1;
    ctx.strokeRect(MARGIN.left, MARGIN.top, plotW, plotH);

    ctx.fillStyle = "#4a5568";
    ctx.font = "11px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "top";
    const isTime = this.data.kind === "timeseries";
    for (let i = 0; i <= 4; i++) {
      const x = xDomain.min + (i / 4) * (xDomain.max - xDomain.min);
      ctx.fillText(formatTick(x, isTime), px(x), MARGIN.top + plotH + 6);
    }
    ctx.textAlign = "right";
    ctx.textBaseline = "middle";
    for (let i = 0; i <= 4; i++) {
      const y = yDomain.min + (i / 4) * (yDomain.max - yDomain.min);
      ctx.fillText(formatTick(y, false), MARGIN.left - 6, py(y));
    }

    if (this.data.kind === "distribution") {
      ctx.fillStyle = PALETTE[0];
      for (const bin of this.data.bins) {
        const x0 = Math.max(px(bin.lo), MARGIN.left);
        const x1 = Math.min(px(bin.hi), MARGIN.left + plotW);
        if (x1 <= x0) continue;
        const top = py(bin.count);
        ctx.fillRect(x0 + 1, top, Math.max(1, x1 - x0 - 2), MARGIN.top + plotH - top);
      }
    } else if (this.data.kind === "scatter") {
      ctx.fillStyle = PALETTE[0];
      for (let i = 0; i < this.data.x.length; i++) {
        const x = this.data.x[i];
        if (x < xDomain.min || x > xDomain.max) continue;
        ctx.beginPath();
        ctx.arc(px(x), py(this.data.y[i]), 2.2, 0, 2 * Math.PI);
        ctx.fill();
      }
    } else {
      this.data.series.forEach((series, index) => {
        ctx.strokeStyle = PALETTE[index % PALETTE.length];
        ctx.lineWidth = 1.2;
        ctx.beginPath();
        let started = false;
        for (let i = 0; i < series.times.length; i++) {
          const t = series.times[i];
          if (t < xDomain.min || t > xDomain.max) continue;
          const x = px(t);
          const y = py(series.values[i]);
          if (started) {
            ctx.lineTo(x, y);
          } else {
            ctx.moveTo(x, y);
            started = true;
          }
        }
        ctx.stroke();
      });
      ctx.textAlign = "left";
      ctx.textBaseline = "top";
      this.data.series.forEach((series, index) => {
        ctx.fillStyle = PALETTE[index % PALETTE.length];
        ctx.fillText(series.label, MARGIN.left + 8, MARGIN.top + 6 + 14 * index);
      });
    }
  }
}
