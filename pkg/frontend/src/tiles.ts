/**
 * Canvas tile store: the client-side RGBA mirror of the server canvas.
 *
 * Tiles are applied strictly in sequence order; a tile older than the last
 * applied one means this client missed or reordered traffic, so it flags a
 * resync and the owner re-fetches the full canvas. The local buffer is never
 * painted by any other path (the server stays the single source of truth).
 */

import type { CanvasPatchEvent } from './protocol.js';

export interface DecodedImage {
  width: number;
  height: number;
  rgba: Uint8ClampedArray; // width * height * 4
}

/** Decode a base64 PNG tile with an injected decoder (browser or pngjs). */
export type PngDecoder = (png: Uint8Array) => Promise<DecodedImage>;

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === 'function') {
    const raw = atob(b64);
    const out = new Uint8Array(raw.length);
    for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, 'base64'));
}

export class TileStore {
  readonly buffer: Uint8ClampedArray<ArrayBuffer>;
  private lastTileSeq = 0;
  private resyncNeeded = false;

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.buffer = new Uint8ClampedArray(new ArrayBuffer(width * height * 4));
    this.buffer.fill(255);
  }

  get needsResync(): boolean {
    return this.resyncNeeded;
  }

  /**
   * Apply one decoded tile. Returns false (and flags a resync) when the tile
   * arrives out of order or does not fit the canvas.
   */
  applyPatch(patch: CanvasPatchEvent, pixels: DecodedImage): boolean {
    if (patch.seq <= this.lastTileSeq) {
      this.resyncNeeded = true;
      return false;
    }
    if (pixels.width !== patch.w || pixels.height !== patch.h ||
        patch.x < 0 || patch.y < 0 ||
        patch.x + patch.w > this.width || patch.y + patch.h > this.height) {
      this.resyncNeeded = true;
      return false;
    }
    for (let row = 0; row < patch.h; row++) {
      const src = row * patch.w * 4;
      const dst = ((patch.y + row) * this.width + patch.x) * 4;
      this.buffer.set(pixels.rgba.subarray(src, src + patch.w * 4), dst);
    }
    this.lastTileSeq = patch.seq;
    return true;
  }

  /** Replace the whole buffer after a full-canvas refetch. */
  resync(full: DecodedImage, seq: number): void {
    if (full.width !== this.width || full.height !== this.height) {
      throw new Error(`resync image is ${full.width}x${full.height}, canvas is ${this.width}x${this.height}`);
    }
    this.buffer.set(full.rgba);
    this.lastTileSeq = seq;
    this.resyncNeeded = false;
  }

  /** 8-bit sRGB pixel at (x, y) as [r, g, b, a]. */
  pixel(x: number, y: number): [number, number, number, number] {
    const k = (y * this.width + x) * 4;
    return [this.buffer[k], this.buffer[k + 1], this.buffer[k + 2], this.buffer[k + 3]];
  }
}
