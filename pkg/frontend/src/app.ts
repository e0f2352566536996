/** Dashboard wiring: map + filters + validation panel + upload + export.
 *
 * The dashboard holds no authoritative state: every view renders from the
 * last successful API response and every mutation round-trips through the
 * API, so a full reload reproduces the same view.
 */

import { ApiClient } from "./api.js";
import type { NamedFile } from "./api.js";
import { DashboardConfig, resolveConfig } from "./config.js";
import { MapView } from "./map.js";
import { ValidationPanel, PanelState } from "./panel.js";
import { pinsFromRecords } from "./pins.js";
import { RequestSequencer } from "./seq.js";
import type { DefectQuery, DefectRecord } from "./types.js";
import { UploadFlow, UploadState } from "./upload.js";

declare global {
  interface Window {
    ROADATLAS_CONFIG?: Partial<DashboardConfig>;
  }
}

const DEFECT_CLASSES = [
  "Kerb_Cracking",
  "Road_Crocodile",
  "Road_Longitudinal",
  "Road_Transverse",
  "Road_Block",
  "Sealed_Crack",
];

export class DashboardApp {
  readonly api: ApiClient;
  readonly map: MapView;
  readonly panel: ValidationPanel;
  readonly uploadFlow: UploadFlow;

  private records: DefectRecord[] = [];
  private selectedId: string | null = null;
  private readonly fetchSeq = new RequestSequencer();

  constructor(
    private readonly root: Document,
    private readonly config: DashboardConfig,
  ) {
    this.api = new ApiClient(config.apiBaseUrl);
    this.map = new MapView(
      must(root.getElementById("map")),
      config.tileUrlTemplate,
      config.initialCenter,
      config.initialZoom,
      {
        onViewportChange: () => void this.refreshPins(),
        onPinClick: (id) => void this.selectDefect(id),
      },
    );
    this.panel = new ValidationPanel(this.api, config.userName, (s) => this.renderPanel(s));
    this.uploadFlow = new UploadFlow(this.api, (s) => this.renderUpload(s));
    this.bindControls();
    this.map.render();
  }

  /** Current class/status filter from the header controls. */
  currentQuery(includeViewport: boolean): DefectQuery {
    const classSelect = this.root.getElementById("filter-class") as HTMLSelectElement;
    const statusSelect = this.root.getElementById("filter-status") as HTMLSelectElement;
    const query: DefectQuery = {};
    if (classSelect?.value) query.classes = [classSelect.value];
    if (statusSelect?.value) query.statuses = [statusSelect.value];
    if (includeViewport) query.geoBox = this.map.geoBox();
    return query;
  }

  async refreshPins(): Promise<void> {
    const token = this.fetchSeq.next();
    try {
      const records = await this.api.listDefects(this.currentQuery(true));
      if (!this.fetchSeq.isCurrent(token)) return; // stale response discarded
      this.records = records;
      this.hideBanner();
      this.renderPins();
    } catch (err) {
      if (!this.fetchSeq.isCurrent(token)) return;
      // non-blocking: last pins stay on the map
      this.showBanner(err instanceof Error ? err.message : String(err));
    }
  }

  async selectDefect(id: string): Promise<void> {
    this.selectedId = id;
    this.renderPins();
    await this.panel.select(id);
  }

  private renderPins(): void {
    this.map.setPins(pinsFromRecords(this.records, this.selectedId));
    const counter = this.root.getElementById("pin-count");
    if (counter) counter.textContent = String(this.records.length);
  }

  private bindControls(): void {
    for (const id of ["filter-class", "filter-status"]) {
      this.root.getElementById(id)?.addEventListener("change", () => void this.refreshPins());
    }
    const classSelect = this.root.getElementById("filter-class") as HTMLSelectElement | null;
    if (classSelect) {
      for (const name of DEFECT_CLASSES) {
        const option = this.root.createElement("option");
        option.value = name;
        option.textContent = name.replace("_", " ");
        classSelect.append(option);
      }
    }
    this.root.getElementById("zoom-in")?.addEventListener("click", () => this.map.zoomBy(1));
    this.root.getElementById("zoom-out")?.addEventListener("click", () => this.map.zoomBy(-1));
    this.root.getElementById("panel-close")?.addEventListener("click", () => {
      this.selectedId = null;
      this.panel.close();
      this.renderPins();
    });
    this.root.getElementById("btn-confirm")?.addEventListener("click", () => {
      void this.panel.validate("Confirmed").then(() => this.syncValidatedRecord());
    });
    this.root.getElementById("btn-reject")?.addEventListener("click", () => {
      void this.panel.validate("Rejected").then(() => this.syncValidatedRecord());
    });
    this.root.getElementById("upload-form")?.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitUpload();
    });
    this.root.getElementById("upload-files")?.addEventListener("change", () => {
      this.renderUpload(this.uploadFlow.current);
    });
    for (const fmt of ["csv", "json"] as const) {
      this.root.getElementById(`export-${fmt}`)?.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.downloadExport(fmt);
      });
    }
  }

  /** Pin restyles immediately after a successful validation. */
  private syncValidatedRecord(): void {
    const record = this.panel.current.record;
    if (!record) return;
    this.records = this.records.map((r) => (r.id === record.id ? { ...r, ...record } : r));
    this.renderPins();
  }

  private renderPanel(state: PanelState): void {
    const panel = this.root.getElementById("panel");
    if (!panel) return;
    panel.hidden = state.activeDefectId === null;
    const error = this.root.getElementById("panel-error");
    if (error) {
      error.hidden = !state.error;
      error.textContent = state.error ?? "";
    }
    const body = this.root.getElementById("panel-body");
    if (!body) return;
    if (state.loading || !state.record) {
      body.querySelectorAll("[data-bind]").forEach((el) => (el.textContent = ""));
      return;
    }
    const r = state.record;
    setText(body, "class", r.class);
    setText(body, "coords", `${r.lat.toFixed(6)}, ${r.lon.toFixed(6)}`);
    setText(body, "confidence", r.confidence.toFixed(3));
    setText(body, "status", r.status);
    setText(body, "checked", r.checked_by ? `${r.checked_by} at ${r.checked_at}` : "never");
    const image = this.root.getElementById("panel-image") as HTMLImageElement | null;
    const mask = this.root.getElementById("panel-mask") as HTMLImageElement | null;
    if (image) image.src = this.config.apiBaseUrl + r.image_url;
    if (mask) mask.src = this.config.apiBaseUrl + r.mask_url;
    this.renderContours(state);
    const pending = state.pendingValidation;
    for (const id of ["btn-confirm", "btn-reject"]) {
      const button = this.root.getElementById(id) as HTMLButtonElement | null;
      if (button) button.disabled = pending;
    }
  }

  /** Marking contours drawn as polylines over the panel image. */
  private renderContours(state: PanelState): void {
    const svg = this.root.getElementById("panel-contours");
    if (!svg || !state.record) return;
    svg.replaceChildren();
    for (const marking of state.markings) {
      const poly = this.root.createElementNS("http://www.w3.org/2000/svg", "polygon");
      poly.setAttribute("points", marking.points.map(([x, y]) => `${x},${y}`).join(" "));
      poly.setAttribute("class", `contour contour-${marking.status.toLowerCase()}`);
      svg.append(poly);
    }
  }

  private async submitUpload(): Promise<void> {
    const input = this.root.getElementById("upload-files") as HTMLInputElement | null;
    const files: NamedFile[] = [...(input?.files ?? [])].map((f) => ({ name: f.name, blob: f }));
    const job = await this.uploadFlow.submit(files);
    if (job?.state === "Done") {
      await this.refreshPins(); // new defects appear without a reload
    }
  }

  private renderUpload(state: UploadState): void {
    const input = this.root.getElementById("upload-files") as HTMLInputElement | null;
    const submit = this.root.getElementById("upload-submit") as HTMLButtonElement | null;
    if (submit) submit.disabled = !this.uploadFlow.canSubmit(input?.files?.length ?? 0);
    const progress = this.root.getElementById("upload-progress");
    if (progress) {
      if (state.job) {
        progress.textContent = `${state.job.state}: ${state.job.processed}/${state.job.total_images}`;
      } else if (state.submitting) {
        progress.textContent = "uploading";
      } else {
        progress.textContent = "";
      }
    }
    const failures = this.root.getElementById("upload-failures");
    if (failures) {
      failures.replaceChildren();
      for (const [name, reason] of state.job?.failures ?? []) {
        const li = this.root.createElement("li");
        li.textContent = `${name}: ${reason}`;
        failures.append(li);
      }
    }
    const error = this.root.getElementById("upload-error");
    if (error) {
      error.hidden = !state.error;
      error.textContent = state.error ?? "";
    }
  }

  private downloadExport(format: "csv" | "json"): void {
    const toggle = this.root.getElementById("export-validated") as HTMLInputElement | null;
    const url = this.api.exportUrl(format, toggle?.checked ?? false, this.currentQuery(false));
    const anchor = this.root.createElement("a");
    anchor.href = url;
    anchor.download = `roadatlas-report.${format}`;
    anchor.click();
  }

  private showBanner(message: string): void {
    const banner = this.root.getElementById("error-banner");
    if (banner) {
      banner.hidden = false;
      banner.textContent = `API error: ${message}`;
    }
  }

  private hideBanner(): void {
    const banner = this.root.getElementById("error-banner");
    if (banner) banner.hidden = true;
  }
}

function must<T>(value: T | null): T {
  if (value === null) throw new Error("required element missing from the page");
  return value;
}

function setText(scope: Element, bind: string, text: string): void {
  const el = scope.querySelector(`[data-bind="${bind}"]`);
  if (el) el.textContent = text;
}

export function bootstrap(doc: Document = document): DashboardApp {
  const app = new DashboardApp(doc, resolveConfig(window.ROADATLAS_CONFIG));
  void app.refreshPins();
  return app;
}
