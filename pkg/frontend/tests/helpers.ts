/** Shared test plumbing: spawn a live session server, PNG codec via pngjs. */

import { spawn, type ChildProcess } from 'node:child_process';
import net from 'node:net';
import path from 'node:path';
import { fileURLToPath } from 'node:url';
import { PNG } from 'pngjs';
import type { DecodedImage } from '../src/tiles.js';

const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '..', '..');

export async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once('error', reject);
    probe.listen(0, '127.0.0.1', () => {
      const address = probe.address() as net.AddressInfo;
      probe.close(() => resolve(address.port));
    });
  });
}

export interface LiveServer {
  baseUrl: string;
  proc: ChildProcess;
  stop: () => Promise<void>;
}

export async function startServer(canvas = '64x64'): Promise<LiveServer> {
  const port = await freePort();
  const proc = spawn(
    'python3',
    ['-m', 'copaint.cli', 'serve', '--host', '127.0.0.1', '--port', String(port), '--canvas', canvas],
    { cwd: REPO_ROOT, stdio: ['ignore', 'pipe', 'pipe'] },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/api/events?since=0&timeout=0`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill();
      throw new Error('server did not come up in time');
    }
    await sleep(150);
  }
  return {
    baseUrl,
    proc,
    stop: async () => {
      proc.kill('SIGTERM');
      await sleep(100);
      if (proc.exitCode === null) proc.kill('SIGKILL');
    },
  };
}

export function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

export async function decodePng(png: Uint8Array): Promise<DecodedImage> {
  const decoded = PNG.sync.read(Buffer.from(png));
  return {
    width: decoded.width,
    height: decoded.height,
    rgba: new Uint8ClampedArray(decoded.data.buffer, decoded.data.byteOffset, decoded.data.length),
  };
}

/** Encode a flat-color image with an optional colored rectangle, as PNG bytes. */
export function encodeTestPng(
  width: number,
  height: number,
  base: [number, number, number],
  rect?: { x: number; y: number; w: number; h: number; color: [number, number, number] },
): Uint8Array {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const k = (y * width + x) * 4;
      let [r, g, b] = base;
      if (rect && x >= rect.x && x < rect.x + rect.w && y >= rect.y && y < rect.y + rect.h) {
        [r, g, b] = rect.color;
      }
      png.data[k] = r;
      png.data[k + 1] = g;
      png.data[k + 2] = b;
      png.data[k + 3] = 255;
    }
  }
  return new Uint8Array(PNG.sync.write(png));
}
