/** Dashboard configuration, overridable via window.ROADATLAS_CONFIG. */

export interface DashboardConfig {
  apiBaseUrl: string;
  userName: string;
  tileUrlTemplate: string;
  initialCenter: { lat: number; lon: number };
  initialZoom: number;
}

export const DEFAULT_CONFIG: DashboardConfig = {
  apiBaseUrl: "",
  userName: "inspector",
  tileUrlTemplate: "https://tile.openstreetmap.org/{z}/{x}/{y}.png",
  initialCenter: { lat: -27.639, lon: 153.109 },
  initialZoom: 13,
};

export function resolveConfig(overrides?: Partial<DashboardConfig>): DashboardConfig {
  return { ...DEFAULT_CONFIG, ...(overrides ?? {}) };
}
