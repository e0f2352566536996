/** Upload flow: submit an image batch, then poll the processing job. */

import { ApiClient } from "./api.js";
import type { NamedFile } from "./api.js";
import type { ProcessingJob } from "./types.js";

export interface UploadState {
  submitting: boolean;
  job: ProcessingJob | null;
  error: string | null;
}

const TERMINAL = new Set(["Done", "Failed"]);

export class UploadFlow {
  private state: UploadState = { submitting: false, job: null, error: null };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: UploadState) => void,
    private readonly pollIntervalMs = 400,
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  get current(): UploadState {
    return this.state;
  }

  /** The submit control stays disabled until files are chosen. */
  canSubmit(fileCount: number): boolean {
    return fileCount > 0 && !this.state.submitting;
  }

  private update(patch: Partial<UploadState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  /** Returns the terminal job snapshot, or null when submission failed. */
  async submit(files: NamedFile[], timeoutMs = 120_000): Promise<ProcessingJob | null> {
    if (!this.canSubmit(files.length)) return null;
    this.update({ submitting: true, job: null, error: null });
    let jobId: string;
    try {
      jobId = (await this.api.upload(files)).job_id;
    } catch (err) {
      this.update({ submitting: false, error: err instanceof Error ? err.message : String(err) });
      return null;
    }
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
      try {
        const job = await this.api.getJob(jobId);
        this.update({ job });
        if (TERMINAL.has(job.state)) {
          this.update({ submitting: false });
          return job;
        }
      } catch (err) {
        this.update({
          submitting: false,
          error: err instanceof Error ? err.message : String(err),
        });
        return null;
      }
      await this.sleep(this.pollIntervalMs);
    }
    this.update({ submitting: false, error: "timed out waiting for the processing job" });
    return null;
  }
}
