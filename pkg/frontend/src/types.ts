/** Wire types mirroring the backend API JSON. */

export type ValidationStatus = "Unchecked" | "Confirmed" | "Rejected";

export type JobState = "Queued" | "Running" | "Done" | "Failed";

export interface BBox {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface DefectRecord {
  id: string;
  image_id: string;
  class: string;
  lat: number;
  lon: number;
  bbox: BBox;
  confidence: number;
  status: ValidationStatus;
  checked_by: string | null;
  checked_at: string | null;
  created_at: string | null;
}

export interface DefectDetail extends DefectRecord {
  image_url: string;
  mask_url: string;
}

export interface MarkingRecord {
  id: string;
  image_id: string;
  points: [number, number][];
  coverage: number;
  status: ValidationStatus;
  checked_by: string | null;
  checked_at: string | null;
  created_at: string | null;
}

export interface ProcessingJob {
  id: string;
  state: JobState;
  submitted_at: string;
  finished_at: string | null;
  total_images: number;
  processed: number;
  failures: [string, string][];
}

export interface GeoBox {
  minLat: number;
  minLon: number;
  maxLat: number;
  maxLon: number;
}

export interface DefectQuery {
  classes?: string[];
  statuses?: string[];
  geoBox?: GeoBox;
  imageId?: string;
}
