/** Validation panel state: selected defect, its detail, pending mutation.
 *
 * The panel is visible exactly when a pin is selected; at most one
 * validation request is in flight; a failed mutation leaves the record
 * untouched and surfaces an inline error.
 */

import { ApiClient, ApiError } from "./api.js";
import { RequestSequencer } from "./seq.js";
import type { DefectDetail, MarkingRecord, ValidationStatus } from "./types.js";

export interface PanelState {
  activeDefectId: string | null;
  record: DefectDetail | null;
  markings: MarkingRecord[];
  loading: boolean;
  pendingValidation: boolean;
  error: string | null;
}

const EMPTY: PanelState = {
  activeDefectId: null,
  record: null,
  markings: [],
  loading: false,
  pendingValidation: false,
  error: null,
};

export class ValidationPanel {
  private state: PanelState = EMPTY;
  private readonly seq = new RequestSequencer();

  constructor(
    private readonly api: ApiClient,
    private readonly userName: string,
    private readonly onChange: (state: PanelState) => void,
  ) {}

  get current(): PanelState {
    return this.state;
  }

  get visible(): boolean {
    return this.state.activeDefectId !== null;
  }

  private update(patch: Partial<PanelState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  close(): void {
    this.state = EMPTY;
    this.onChange(this.state);
  }

  async select(defectId: string): Promise<void> {
    const token = this.seq.next();
    this.update({
      activeDefectId: defectId,
      record: null,
      markings: [],
      loading: true,
      error: null,
      pendingValidation: false,
    });
    try {
      const record = await this.api.getDefect(defectId);
      const markings = await this.api.listMarkings(record.image_id);
      if (!this.seq.isCurrent(token)) return; // a newer selection superseded this one
      this.update({ record, markings, loading: false });
    } catch (err) {
      if (!this.seq.isCurrent(token)) return;
      this.update({ loading: false, error: describe(err) });
    }
  }

  /** Confirm or reject the open defect; no-op while a request is pending. */
  async validate(status: ValidationStatus): Promise<void> {
    const record = this.state.record;
    if (!record || this.state.pendingValidation) return;
    this.update({ pendingValidation: true, error: null });
    try {
      const updated = await this.api.validateDefect(record.id, status, this.userName);
      this.update({
        pendingValidation: false,
        record: { ...record, ...updated },
      });
    } catch (err) {
      // record intentionally unchanged on failure
      this.update({ pendingValidation: false, error: describe(err) });
    }
  }

  async validateMarking(markingId: string, status: ValidationStatus): Promise<void> {
    if (this.state.pendingValidation) return;
    this.update({ pendingValidation: true, error: null });
    try {
      const updated = await this.api.validateMarking(markingId, status, this.userName);
      this.update({
        pendingValidation: false,
        markings: this.state.markings.map((m) => (m.id === updated.id ? updated : m)),
      });
    } catch (err) {
      this.update({ pendingValidation: false, error: describe(err) });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
