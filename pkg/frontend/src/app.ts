/**
 * Browser entry point: wires pointer input, the tile mirror, and the
 * workflow toolbar to a live session server.
 *
 * The local canvas pixels come exclusively from server tiles; while a stroke
 * is in flight a lightweight preview is drawn on a separate overlay canvas
 * and wiped as soon as the authoritative tile lands.
 */

import { ProtocolClient, ProtocolError, type ServerEvent } from './protocol.js';
import { LassoCapture } from './lasso.js';
import { StrokeCapture, type BrushSettings, type PointerSample } from './stroke.js';
import { TileStore, base64ToBytes, type DecodedImage } from './tiles.js';
import { WorkflowControls } from './controls.js';

async function decodePngBrowser(png: Uint8Array): Promise<DecodedImage> {
  const bitmap = await createImageBitmap(new Blob([png as BlobPart], { type: 'image/png' }));
  const surface = new OffscreenCanvas(bitmap.width, bitmap.height);
  const ctx = surface.getContext('2d')!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  return { width: bitmap.width, height: bitmap.height, rgba: data.data };
}

function toSample(ev: PointerEvent, canvas: HTMLCanvasElement): PointerSample {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
    pressure: ev.pressure,
    timeStamp: ev.timeStamp,
    pointerType: ev.pointerType,
  };
}

export function startApp(root: Document = document): void {
  const canvas = root.getElementById('paint-canvas') as HTMLCanvasElement;
  const overlay = root.getElementById('overlay-canvas') as HTMLCanvasElement;
  const status = root.getElementById('status') as HTMLElement;
  const client = new ProtocolClient('');
  const tiles = new TileStore(canvas.width, canvas.height);
  const controls = new WorkflowControls(client, (msg) => (status.textContent = msg));
  const lasso = new LassoCapture();

  const settings: BrushSettings = {
    mode: 'hard_round',
    texture: null,
    baseSize: 12,
    color: [0.1, 0.1, 0.1],
    smoothing: true,
  };
  const capture = new StrokeCapture(settings);
  let tool: 'brush' | 'lasso' = 'brush';

  const ctx = canvas.getContext('2d')!;
  const octx = overlay.getContext('2d')!;

  function repaint(): void {
    ctx.putImageData(new ImageData(tiles.buffer, tiles.width, tiles.height), 0, 0);
  }

  async function onEvent(event: ServerEvent): Promise<void> {
    if (event.type === 'canvas_patch') {
      const pixels = await decodePngBrowser(base64ToBytes(event.tile));
      if (!tiles.applyPatch(event, pixels)) {
        const full = await decodePngBrowser(await client.fetchCanvasPng());
        tiles.resync(full, event.seq);
      }
      octx.clearRect(0, 0, overlay.width, overlay.height);
      repaint();
    } else if (event.type === 'job_status') {
      status.textContent = `refine job ${event.job_id}: ${event.status}`;
    }
  }

  client.startEventLoop(
    (event) => void onEvent(event),
    (err) => (status.textContent = `connection hiccup: ${String(err)}`),
  );

  canvas.addEventListener('pointerdown', (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    const s = toSample(ev, canvas);
    if (tool === 'lasso') {
      lasso.begin(s.x, s.y);
    } else {
      capture.begin(s);
      octx.strokeStyle = 'rgba(40,40,40,0.65)';
      octx.lineWidth = settings.baseSize;
      octx.lineCap = 'round';
      octx.beginPath();
      octx.moveTo(s.x, s.y);
    }
  });

  canvas.addEventListener('pointermove', (ev) => {
    const s = toSample(ev, canvas);
    if (tool === 'lasso' && lasso.isActive) {
      lasso.extend(s.x, s.y);
    } else if (capture.isActive) {
      capture.move(s);
      octx.lineTo(s.x, s.y);
      octx.stroke();
    }
  });

  canvas.addEventListener('pointerup', async (ev) => {
    if (tool === 'lasso') {
      const message = lasso.finish();
      if (message) {
        try {
          const reply = await client.send(message);
          status.textContent = `lasso: ${String(reply['pixels'])} px selected`;
        } catch (err) {
          status.textContent = String(err);
        }
      }
      return;
    }
    const stroke = capture.end(toSample(ev, canvas));
    if (!stroke) return;
    try {
      await client.send({ type: 'stroke', stroke });
    } catch (err) {
      octx.clearRect(0, 0, overlay.width, overlay.height);
      status.textContent = err instanceof ProtocolError ? `${err.code}: ${err.message}` : String(err);
    }
  });

  // toolbar wiring
  const on = (id: string, fn: () => void) => root.getElementById(id)?.addEventListener('click', fn);
  on('tool-brush', () => (tool = 'brush'));
  on('tool-lasso', () => (tool = 'lasso'));
  on('lasso-clear', () => void client.send(LassoCapture.clearMessage()));
  on('act-optimize', () => void controls.optimizeHistory().catch((e) => (status.textContent = String(e))));
  on('act-step', () => void controls.completeStep(1).catch((e) => (status.textContent = String(e))));
  on('act-inpaint', () => void controls.inpaint('region', Date.now() % 10_000).catch((e) => (status.textContent = String(e))));
  on('act-undo', () => void controls.undo());
  on('act-redo', () => void controls.redo());
  on('act-continue', () => {
    if (controls.continuationActive) {
      void controls.stopContinuation();
    } else {
      controls.startContinuation();
    }
  });

  const sizeInput = root.getElementById('brush-size') as HTMLInputElement | null;
  sizeInput?.addEventListener('input', () => (settings.baseSize = Number(sizeInput.value)));
  const colorInput = root.getElementById('brush-color') as HTMLInputElement | null;
  colorInput?.addEventListener('input', () => {
    const hex = colorInput.value;
    settings.color = [
      parseInt(hex.slice(1, 3), 16) / 255,
      parseInt(hex.slice(3, 5), 16) / 255,
      parseInt(hex.slice(5, 7), 16) / 255,
    ];
  });
  const smoothingInput = root.getElementById('brush-smoothing') as HTMLInputElement | null;
  smoothingInput?.addEventListener('change', () => (settings.smoothing = smoothingInput.checked));
  const modeInput = root.getElementById('brush-mode') as HTMLSelectElement | null;
  modeInput?.addEventListener('change', () => {
    settings.mode = modeInput.value as BrushSettings['mode'];
  });

  const refInput = root.getElementById('reference-file') as HTMLInputElement | null;
  refInput?.addEventListener('change', async () => {
    const file = refInput.files?.[0];
    if (!file) return;
    try {
      const imageId = await client.uploadImage(new Uint8Array(await file.arrayBuffer()));
      await client.send({ type: 'set_reference', image_id: imageId });
      status.textContent = 'reference loaded';
    } catch (err) {
      status.textContent = String(err);
    }
  });

  // initial sync
  void (async () => {
    const full = await decodePngBrowser(await client.fetchCanvasPng());
    tiles.resync(full, 0);
    repaint();
  })();
}

if (typeof document !== 'undefined' && document.getElementById('paint-canvas')) {
  startApp();
}
