/** Web Mercator slippy-map math: tiles, world pixels, viewport geo boxes. */

import type { GeoBox } from "./types.js";

export const TILE_SIZE = 256;
const MAX_LAT = 85.05112878; // Web Mercator clamp

export interface TilePlacement {
  x: number;
  y: number;
  z: number;
  screenX: number;
  screenY: number;
}

export function clampLat(lat: number): number {
  return Math.max(-MAX_LAT, Math.min(MAX_LAT, lat));
}

export function worldSize(zoom: number): number {
  return TILE_SIZE * 2 ** zoom;
}

/** Geographic position to absolute world pixel at a zoom level. */
export function latLonToPixel(lat: number, lon: number, zoom: number): { x: number; y: number } {
  const size = worldSize(zoom);
  const x = ((lon + 180) / 360) * size;
  const rad = (clampLat(lat) * Math.PI) / 180;
  const y = ((1 - Math.log(Math.tan(rad) + 1 / Math.cos(rad)) / Math.PI) / 2) * size;
  return { x, y };
}

export function pixelToLatLon(x: number, y: number, zoom: number): { lat: number; lon: number } {
  const size = worldSize(zoom);
  const lon = (x / size) * 360 - 180;
  const n = Math.PI - (2 * Math.PI * y) / size;
  const lat = (180 / Math.PI) * Math.atan(0.5 * (Math.exp(n) - Math.exp(-n)));
  return { lat, lon };
}

export function lonToTileX(lon: number, zoom: number): number {
  return Math.floor(((lon + 180) / 360) * 2 ** zoom);
}

export function latToTileY(lat: number, zoom: number): number {
  return Math.floor(latLonToPixel(lat, 0, zoom).y / TILE_SIZE);
}

/** Geographic bounds of the viewport centered at (lat, lon). */
export function viewportGeoBox(
  center: { lat: number; lon: number },
  zoom: number,
  widthPx: number,
  heightPx: number,
): GeoBox {
  const c = latLonToPixel(center.lat, center.lon, zoom);
  const topLeft = pixelToLatLon(c.x - widthPx / 2, c.y - heightPx / 2, zoom);
  const bottomRight = pixelToLatLon(c.x + widthPx / 2, c.y + heightPx / 2, zoom);
  return {
    minLat: Math.max(-90, Math.min(topLeft.lat, bottomRight.lat)),
    maxLat: Math.min(90, Math.max(topLeft.lat, bottomRight.lat)),
    minLon: Math.max(-180, Math.min(topLeft.lon, bottomRight.lon)),
    maxLon: Math.min(180, Math.max(topLeft.lon, bottomRight.lon)),
  };
}

/** Tiles covering the viewport plus their top-left screen coordinates. */
export function visibleTiles(
  center: { lat: number; lon: number },
  zoom: number,
  widthPx: number,
  heightPx: number,
): TilePlacement[] {
  const c = latLonToPixel(center.lat, center.lon, zoom);
  const left = c.x - widthPx / 2;
  const top = c.y - heightPx / 2;
  const maxTile = 2 ** zoom;
  const tiles: TilePlacement[] = [];
  const x0 = Math.floor(left / TILE_SIZE);
  const y0 = Math.floor(top / TILE_SIZE);
  const x1 = Math.floor((left + widthPx) / TILE_SIZE);
  const y1 = Math.floor((top + heightPx) / TILE_SIZE);
  for (let ty = y0; ty <= y1; ty++) {
    if (ty < 0 || ty >= maxTile) continue;
    for (let tx = x0; tx <= x1; tx++) {
      const wrapped = ((tx % maxTile) + maxTile) % maxTile;
      tiles.push({
        x: wrapped,
        y: ty,
        z: zoom,
        screenX: tx * TILE_SIZE - left,
        screenY: ty * TILE_SIZE - top,
      });
    }
  }
  return tiles;
}

export function tileUrl(template: string, tile: { x: number; y: number; z: number }): string {
  return template
    .replace("{z}", String(tile.z))
    .replace("{x}", String(tile.x))
    .replace("{y}", String(tile.y));
}

/** Screen offset of a geographic point within the viewport. */
export function latLonToScreen(
  point: { lat: number; lon: number },
  center: { lat: number; lon: number },
  zoom: number,
  widthPx: number,
  heightPx: number,
): { x: number; y: number } {
  const c = latLonToPixel(center.lat, center.lon, zoom);
  const p = latLonToPixel(point.lat, point.lon, zoom);
  return { x: p.x - c.x + widthPx / 2, y: p.y - c.y + heightPx / 2 };
}
