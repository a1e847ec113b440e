/**
 * Wire-protocol client: JSON messages over POST plus a long-poll event loop.
 *
 * The server is the single source of pixel truth; this module only moves
 * messages and ordered events. All functions work in both the browser and
 * Node (tests), using the global fetch.
 */

export interface StrokeSampleJson {
  x: number;
  y: number;
  pressure: number;
  t: number;
}

export interface StrokeJson {
  tool: { mode: string; texture: string | null };
  base_size: number;
  color: [number, number, number];
  smoothing: boolean;
  samples: StrokeSampleJson[];
}

export type ClientMessage =
  | { type: 'stroke'; stroke: StrokeJson }
  | { type: 'lasso'; vertices: [number, number][] }
  | { type: 'lasso'; cleared: true }
  | { type: 'set_reference'; image_id: string }
  | { type: 'optimize_history' }
  | { type: 'complete_step'; count: number }
  | { type: 'inpaint'; label: string; seed: number }
  | { type: 'refine'; stroke_id: number }
  | { type: 'undo' }
  | { type: 'redo' };

export interface CanvasPatchEvent {
  type: 'canvas_patch';
  seq: number;
  x: number;
  y: number;
  w: number;
  h: number;
  tile: string; // base64 sRGB PNG
}

export interface HistoryEvent {
  type: 'history_event';
  seq: number;
  op: string;
  entry_ids: number[];
  history_len: number;
}

export interface JobStatusEvent {
  type: 'job_status';
  seq: number;
  job_id: number;
  status: 'pending' | 'done' | 'superseded';
}

export type ServerEvent = CanvasPatchEvent | HistoryEvent | JobStatusEvent;

export class ProtocolError extends Error {
  constructor(
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ProtocolError';
  }
}

export class ProtocolClient {
  constructor(readonly baseUrl: string) {}

  async send<T = Record<string, unknown>>(message: ClientMessage): Promise<T> {
    const resp = await fetch(`${this.baseUrl}/api/message`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(message),
    });
    const body = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok || body['type'] === 'error') {
      throw new ProtocolError(String(body['code'] ?? 'unknown'), String(body['message'] ?? resp.status));
    }
    return body as T;
  }

  async uploadImage(png: Uint8Array): Promise<string> {
    const resp = await fetch(`${this.baseUrl}/api/images`, {
      method: 'POST',
      body: new Blob([png as BlobPart]),
    });
    const body = (await resp.json()) as { ok?: boolean; image_id?: string; code?: string; message?: string };
    if (!resp.ok || !body.image_id) {
      throw new ProtocolError(body.code ?? 'bad_image', body.message ?? 'upload failed');
    }
    return body.image_id;
  }

  async poll(since: number, timeoutSec = 10): Promise<{ events: ServerEvent[]; next: number }> {
    const resp = await fetch(`${this.baseUrl}/api/events?since=${since}&timeout=${timeoutSec}`);
    if (!resp.ok) throw new ProtocolError('poll_failed', `status ${resp.status}`);
    return (await resp.json()) as { events: ServerEvent[]; next: number };
  }

  async fetchCanvasPng(): Promise<Uint8Array> {
    const resp = await fetch(`${this.baseUrl}/api/canvas.png`);
    if (!resp.ok) throw new ProtocolError('canvas_failed', `status ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  /**
   * Long-poll loop delivering events in order. Returns a stop function; the
   * loop also stops if the handler throws.
   */
  startEventLoop(handler: (event: ServerEvent) => void, onError?: (err: unknown) => void): () => void {
    let running = true;
    let cursor = 0;
    const run = async () => {
      while (running) {
        try {
          const page = await this.poll(cursor, 10);
          cursor = page.next;
          for (const event of page.events) {
            if (!running) break;
            handler(event);
          }
        } catch (err) {
          if (!running) return;
          onError?.(err);
          await new Promise((r) => setTimeout(r, 250));
        }
      }
    };
    void run();
    return () => {
      running = false;
    };
  }
}
