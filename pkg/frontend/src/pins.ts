/** Map pin view models: one pin per defect record, styling and clustering. */

import type { DefectRecord, ValidationStatus } from "./types.js";
import { latLonToPixel } from "./tiles.js";

export interface PinViewModel {
  id: string;
  lat: number;
  lon: number;
  defectClass: string;
  status: ValidationStatus;
  selected: boolean;
}

export interface PinCluster {
  lat: number;
  lon: number;
  count: number;
}

export type PinShape = "hollow" | "filled" | "crossed";

export interface PinStyle {
  color: string;
  shape: PinShape;
}

const CLASS_COLORS: Record<string, string> = {
  Kerb_Cracking: "#9467bd",
  Road_Crocodile: "#d62728",
  Road_Longitudinal: "#1f77b4",
  Road_Transverse: "#ff7f0e",
  Road_Block: "#2ca02c",
  Sealed_Crack: "#8c564b",
};

const STATUS_SHAPES: Record<ValidationStatus, PinShape> = {
  Unchecked: "hollow",
  Confirmed: "filled",
  Rejected: "crossed",
};

export const CLUSTER_THRESHOLD = 200;

/** Pure function of (class, status); unknown classes fall back to gray. */
export function pinStyle(defectClass: string, status: ValidationStatus): PinStyle {
  return {
    color: CLASS_COLORS[defectClass] ?? "#7f7f7f",
    shape: STATUS_SHAPES[status],
  };
}

export function pinsFromRecords(records: DefectRecord[], selectedId: string | null): PinViewModel[] {
  return records.map((r) => ({
    id: r.id,
    lat: r.lat,
    lon: r.lon,
    defectClass: r.class,
    status: r.status,
    selected: r.id === selectedId,
  }));
}

export interface ClusteredPins {
  pins: PinViewModel[];
  clusters: PinCluster[];
}

/**
 * Above the threshold, pins collapse into grid cells (one cluster marker
 * per occupied cell, at the cell's mean position).  The selected pin stays
 * individual so the panel link is never hidden.
 */
export function clusterPins(pins: PinViewModel[], zoom: number, cellPx = 64): ClusteredPins {
  if (pins.length <= CLUSTER_THRESHOLD) {
    return { pins, clusters: [] };
  }
  const cells = new Map<string, { latSum: number; lonSum: number; count: number }>();
  const keep: PinViewModel[] = [];
  for (const pin of pins) {
    if (pin.selected) {
      keep.push(pin);
      continue;
    }
    const p = latLonToPixel(pin.lat, pin.lon, zoom);
    const key = `${Math.floor(p.x / cellPx)}:${Math.floor(p.y / cellPx)}`;
    const cell = cells.get(key) ?? { latSum: 0, lonSum: 0, count: 0 };
    cell.latSum += pin.lat;
    cell.lonSum += pin.lon;
    cell.count += 1;
    cells.set(key, cell);
  }
  const clusters = [...cells.values()].map((c) => ({
    lat: c.latSum / c.count,
    lon: c.lonSum / c.count,
    count: c.count,
  }));
  return { pins: keep, clusters };
}
