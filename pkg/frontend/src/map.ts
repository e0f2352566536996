/** Slippy map with a pin overlay: tiles from a URL template, DOM rendering.
 *
 * Pin elements are pure renderings of their view models; dragging and the
 * zoom controls change only the viewport and fire onViewportChange so the
 * app can re-fetch pins for the new geo box.
 */

import type { PinCluster, PinViewModel } from "./pins.js";
import { clusterPins, pinStyle } from "./pins.js";
import { latLonToScreen, tileUrl, viewportGeoBox, visibleTiles, TILE_SIZE } from "./tiles.js";
import type { GeoBox } from "./types.js";
import { pixelToLatLon, latLonToPixel } from "./tiles.js";

export interface MapCallbacks {
  onViewportChange: (box: GeoBox) => void;
  onPinClick: (id: string) => void;
}

export class MapView {
  center: { lat: number; lon: number };
  zoom: number;

  private readonly tileLayer: HTMLElement;
  private readonly pinLayer: HTMLElement;
  private pins: PinViewModel[] = [];
  private dragging: { x: number; y: number } | null = null;

  constructor(
    private readonly container: HTMLElement,
    private readonly tileTemplate: string,
    start: { lat: number; lon: number },
    zoom: number,
    private readonly callbacks: MapCallbacks,
  ) {
    this.center = { ...start };
    this.zoom = zoom;
    this.container.classList.add("map-root");
    this.tileLayer = document.createElement("div");
    this.tileLayer.className = "tile-layer";
    this.pinLayer = document.createElement("div");
    this.pinLayer.className = "pin-layer";
    this.container.append(this.tileLayer, this.pinLayer);
    this.bindPointerEvents();
  }

  get size(): { width: number; height: number } {
    return {
      width: this.container.clientWidth || 800,
      height: this.container.clientHeight || 500,
    };
  }

  geoBox(): GeoBox {
    const { width, height } = this.size;
    return viewportGeoBox(this.center, this.zoom, width, height);
  }

  setPins(pins: PinViewModel[]): void {
    this.pins = pins;
    this.renderPins();
  }

  render(): void {
    this.renderTiles();
    this.renderPins();
  }

  zoomBy(delta: number): void {
    this.zoom = Math.max(2, Math.min(19, this.zoom + delta));
    this.render();
    this.callbacks.onViewportChange(this.geoBox());
  }

  panByPixels(dx: number, dy: number): void {
    const c = latLonToPixel(this.center.lat, this.center.lon, this.zoom);
    this.center = pixelToLatLon(c.x + dx, c.y + dy, this.zoom);
    this.render();
    this.callbacks.onViewportChange(this.geoBox());
  }

  private bindPointerEvents(): void {
    this.container.addEventListener("pointerdown", (ev) => {
      this.dragging = { x: ev.clientX, y: ev.clientY };
    });
    this.container.addEventListener("pointermove", (ev) => {
      if (!this.dragging) return;
      const dx = this.dragging.x - ev.clientX;
      const dy = this.dragging.y - ev.clientY;
      if (Math.abs(dx) + Math.abs(dy) < 3) return;
      this.dragging = { x: ev.clientX, y: ev.clientY };
      this.panByPixels(dx, dy);
    });
    const stop = () => {
      this.dragging = null;
    };
    this.container.addEventListener("pointerup", stop);
    this.container.addEventListener("pointerleave", stop);
  }

  private renderTiles(): void {
    const { width, height } = this.size;
    this.tileLayer.replaceChildren();
    for (const tile of visibleTiles(this.center, this.zoom, width, height)) {
      const img = document.createElement("img");
      img.className = "tile";
      img.src = tileUrl(this.tileTemplate, tile);
      img.style.left = `${tile.screenX}px`;
      img.style.top = `${tile.screenY}px`;
      img.width = TILE_SIZE;
      img.height = TILE_SIZE;
      img.draggable = false;
      this.tileLayer.append(img);
    }
  }

  private renderPins(): void {
    const { width, height } = this.size;
    const { pins, clusters } = clusterPins(this.pins, this.zoom);
    this.pinLayer.replaceChildren();
    for (const pin of pins) {
      this.pinLayer.append(this.pinElement(pin, width, height));
    }
    for (const cluster of clusters) {
      this.pinLayer.append(this.clusterElement(cluster, width, height));
    }
  }

  private pinElement(pin: PinViewModel, width: number, height: number): HTMLElement {
    const el = document.createElement("button");
    const style = pinStyle(pin.defectClass, pin.status);
    el.className = `pin pin-${style.shape}${pin.selected ? " pin-selected" : ""}`;
    el.dataset.defectId = pin.id;
    el.title = `${pin.defectClass} (${pin.status})`;
    el.style.setProperty("--pin-color", style.color);
    const pos = latLonToScreen(pin, this.center, this.zoom, width, height);
    el.style.left = `${pos.x}px`;
    el.style.top = `${pos.y}px`;
    if (style.shape === "crossed") el.textContent = "×";
    el.addEventListener("click", (ev) => {
      ev.stopPropagation();
      this.callbacks.onPinClick(pin.id);
    });
    return el;
  }

  private clusterElement(cluster: PinCluster, width: number, height: number): HTMLElement {
    const el = document.createElement("div");
    el.className = "pin-cluster";
    el.textContent = String(cluster.count);
    const pos = latLonToScreen(cluster, this.center, this.zoom, width, height);
    el.style.left = `${pos.x}px`;
    el.style.top = `${pos.y}px`;
    return el;
  }
}
