/**
 * Lasso selection capture: a closed polygon in canvas coordinates.
 *
 * Vertices accumulate while the pointer drags; the polygon auto-closes on
 * finish (the server closes the ring itself, so the first vertex is not
 * repeated). Fewer than 3 vertices is not a selection.
 */

import type { ClientMessage } from './protocol.js';

export class LassoCapture {
  private vertices: [number, number][] = [];
  private active = false;

  get isActive(): boolean {
    return this.active;
  }

  get points(): readonly [number, number][] {
    return this.vertices;
  }

  begin(x: number, y: number): void {
    this.active = true;
    this.vertices = [[x, y]];
  }

  extend(x: number, y: number, minStep = 2.0): void {
    if (!this.active) return;
    const last = this.vertices[this.vertices.length - 1];
    if (Math.hypot(x - last[0], y - last[1]) >= minStep) {
      this.vertices.push([x, y]);
    }
  }

  /** Close the polygon; returns the lasso message or null when degenerate. */
  finish(): Extract<ClientMessage, { vertices: [number, number][] }> | null {
    this.active = false;
    if (this.vertices.length < 3) {
      this.vertices = [];
      return null;
    }
    return { type: 'lasso', vertices: this.vertices };
  }

  static clearMessage(): ClientMessage {
    return { type: 'lasso', cleared: true };
  }
}
