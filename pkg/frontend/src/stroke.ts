/**
 * Pointer-event capture: buffers samples between pointer-down and pointer-up
 * and serializes them into the protocol `stroke` message.
 *
 * Stylus pressure passes straight through. Mouse input has no pressure
 * channel, so it is synthesized from cursor speed with an exponential
 * falloff: slow, deliberate movement paints near full pressure, fast flicks
 * taper off but never reach zero.
 */

import type { StrokeJson } from './protocol.js';

export interface PointerSample {
  x: number;
  y: number;
  pressure: number; // 0 for mouse events
  timeStamp: number; // milliseconds
  pointerType: string; // "pen" | "mouse" | "touch"
}

export interface BrushSettings {
  mode: 'hard_round' | 'brush_tip' | 'gaussian';
  texture: string | null;
  baseSize: number;
  color: [number, number, number];
  smoothing: boolean;
}

const MOUSE_PRESSURE_MIN = 0.25;
const MOUSE_PRESSURE_MAX = 1.0;
const MOUSE_SPEED_TAU = 600; // px/s at which pressure has decayed by 1/e

export function mousePressureFromSpeed(speedPxPerSec: number): number {
  const span = MOUSE_PRESSURE_MAX - MOUSE_PRESSURE_MIN;
  return MOUSE_PRESSURE_MIN + span * Math.exp(-Math.max(speedPxPerSec, 0) / MOUSE_SPEED_TAU);
}

export class StrokeCapture {
  private samples: { x: number; y: number; pressure: number; t: number }[] = [];
  private startTime = 0;
  private last: PointerSample | null = null;
  private active = false;

  constructor(public settings: BrushSettings) {}

  get isActive(): boolean {
    return this.active;
  }

  begin(sample: PointerSample): void {
    this.active = true;
    this.samples = [];
    this.startTime = sample.timeStamp;
    this.last = null;
    this.push(sample);
  }

  move(sample: PointerSample): void {
    if (!this.active) return;
    this.push(sample);
  }

  /** Finish the stroke; returns null for an empty capture (discarded). */
  end(sample?: PointerSample): StrokeJson | null {
    if (!this.active) return null;
    if (sample) this.push(sample);
    this.active = false;
    if (this.samples.length === 0) return null;
    return {
      tool: { mode: this.settings.mode, texture: this.settings.texture },
      base_size: this.settings.baseSize,
      color: this.settings.color,
      smoothing: this.settings.smoothing,
      samples: this.samples,
    };
  }

  private push(sample: PointerSample): void {
    let pressure = sample.pressure;
    if (sample.pointerType !== 'pen') {
      pressure = mousePressureFromSpeed(this.speedOf(sample));
    }
    // duplicate timestamps happen with coalesced events; keep t nondecreasing
    const t = Math.max(sample.timeStamp - this.startTime, this.samples.length ? this.samples[this.samples.length - 1].t : 0);
    this.samples.push({ x: sample.x, y: sample.y, pressure: clamp01(pressure), t });
    this.last = sample;
  }

  private speedOf(sample: PointerSample): number {
    if (!this.last) return 0;
    const dt = Math.max(sample.timeStamp - this.last.timeStamp, 1) / 1000;
    const dist = Math.hypot(sample.x - this.last.x, sample.y - this.last.y);
    return dist / dt;
  }
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}
