"""JSON-over-HTTP wire protocol for interactive clients.

The UI talks to a session through two endpoints:

* ``POST /api/message`` with a JSON body ``{"type": ...}`` - one of
  ``stroke``, ``lasso``, ``set_reference``, ``optimize_history``,
  ``complete_step``, ``inpaint``, ``refine``, ``undo``, ``redo``.
  Errors come back as HTTP 400 with ``{"type": "error", "code", "message"}``.
* ``GET /api/events?since=N&timeout=S`` - long-poll for ordered server
  events: ``canvas_patch`` (base64 sRGB PNG tile plus x/y/w/h), ``history_event``
  and ``job_status``, each carrying a monotonically increasing ``seq``.

Reference images are uploaded as raw PNG bodies to ``POST /api/images`` and
activated with ``set_reference {image_id}``. ``GET /api/canvas.png`` returns
the full canvas for a client resync. The canvas is mutated only by the
session; clients must treat tiles as the single source of pixel truth.
"""

from __future__ import annotations

import base64
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image, ImageDraw

from .formats import export_image, import_image, stroke_record_from_json
from .predictors import ReferenceOracle
from .session import COMPLETE, Session

MAX_POLL_SECONDS = 25.0


class ProtocolError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class SessionHub:
    """Event log and message dispatch around one session."""

    def __init__(self, session: Session):
        self.session = session
        self.events: list[dict] = []
        self._cond = threading.Condition()
        self._images: dict[str, np.ndarray] = {}
        self._next_image = 1
        session.add_listener(self._on_session_event)

    # -- events -------------------------------------------------------------

    def _append(self, event: dict) -> None:
        with self._cond:
            event["seq"] = len(self.events) + 1
            self.events.append(event)
            self._cond.notify_all()

    def _on_session_event(self, event: dict) -> None:
        kind = event.get("type")
        if kind == "history":
            self._append({"type": "history_event", "op": event["op"],
                          "entry_ids": event["entry_ids"],
                          "history_len": event["history_len"]})
            self._append(self._patch_for(event.get("bbox")))
        elif kind == "job":
            self._append({"type": "job_status", "job_id": event["job_id"],
                          "status": event["status"]})

    def _patch_for(self, bbox) -> dict:
        canvas = self.session.canvas  # listeners run under the session lock
        if bbox is None:
            x0, y0 = 0, 0
            h, w = canvas.shape[:2]
        else:
            x0, y0, w, h = bbox
        tile = canvas[y0:y0 + h, x0:x0 + w]
        return {"type": "canvas_patch", "x": x0, "y": y0, "w": w, "h": h,
                "tile": base64.b64encode(export_image(tile)).decode("ascii")}

    def wait_events(self, since: int, timeout: float) -> list[dict]:
        deadline = min(max(timeout, 0.0), MAX_POLL_SECONDS)
        with self._cond:
            if len(self.events) <= since:
                self._cond.wait(deadline)
            return list(self.events[since:])

    # -- uploads ------------------------------------------------------------

    def store_image(self, data: bytes) -> str:
        try:
            canvas = import_image(data)
        except ValueError as exc:
            raise ProtocolError("bad_image", str(exc)) from None
        with self._cond:
            image_id = f"img-{self._next_image}"
            self._next_image += 1
            self._images[image_id] = canvas
        return image_id

    # -- messages -----------------------------------------------------------

    def handle(self, message: dict) -> dict:
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolError("bad_request", "message must be an object with a 'type'")
        mtype = message["type"]
        handler = getattr(self, f"_msg_{mtype}", None)
        if handler is None:
            raise ProtocolError("bad_request", f"unknown message type {mtype!r}")
        return handler(message)

    def _msg_stroke(self, message: dict) -> dict:
        if "stroke" not in message:
            raise ProtocolError("bad_request", "stroke message needs a 'stroke' payload")
        try:
            record, warnings = stroke_record_from_json(message["stroke"])
            stroke_id = self.session.apply_user_stroke(record)
        except (ValueError, KeyError) as exc:
            raise ProtocolError("bad_stroke", str(exc)) from None
        return {"ok": True, "stroke_id": stroke_id, "warnings": warnings}

    def _msg_lasso(self, message: dict) -> dict:
        if message.get("cleared"):
            self.session.set_lasso(None)
            return {"ok": True, "active": False}
        vertices = message.get("vertices")
        if not isinstance(vertices, list) or len(vertices) < 3:
            raise ProtocolError("bad_lasso", "lasso needs at least 3 vertices")
        W, H = self.session.config.width, self.session.config.height
        img = Image.new("L", (W, H), 0)
        try:
            points = [(float(x), float(y)) for x, y in vertices]
        except (TypeError, ValueError):
            raise ProtocolError("bad_lasso", "vertices must be [x, y] pairs") from None
        ImageDraw.Draw(img).polygon(points, fill=1)
        mask = np.asarray(img, dtype=bool)
        try:
            self.session.set_lasso(mask)
        except ValueError as exc:
            raise ProtocolError("bad_lasso", str(exc)) from None
        return {"ok": True, "active": True, "pixels": int(mask.sum())}

    def _msg_set_reference(self, message: dict) -> dict:
        image_id = message.get("image_id")
        with self._cond:
            canvas = self._images.get(image_id)
        if canvas is None:
            raise ProtocolError("unknown_image", f"no uploaded image {image_id!r}")
        if canvas.shape != self.session.canvas.shape:
            raise ProtocolError(
                "bad_image",
                f"reference {canvas.shape[:2]} does not match canvas "
                f"{self.session.canvas.shape[:2]}")
        self.session.set_intent(ReferenceOracle(reference=canvas))
        return {"ok": True}

    def _msg_optimize_history(self, _message: dict) -> dict:
        try:
            entries = self.session.optimize_history()
        except ValueError as exc:
            raise ProtocolError("empty_history", str(exc)) from None
        return {"ok": True, "history_len": len(entries)}

    def _msg_complete_step(self, message: dict) -> dict:
        count = message.get("count", 1)
        if not isinstance(count, int) or count < 1:
            raise ProtocolError("bad_request", "count must be a positive integer")
        committed = []
        complete = False
        for _ in range(count):
            try:
                result = self.session.stroke_completion_step()
            except ValueError as exc:
                raise ProtocolError("no_intent", str(exc)) from None
            if result == COMPLETE:
                complete = True
                break
            committed.append(result.entry_id)
        return {"ok": True, "committed": committed, "complete": complete}

    def _msg_inpaint(self, message: dict) -> dict:
        if self.session.lasso is None:
            raise ProtocolError("no_lasso", "inpaint needs an active lasso mask")
        label = message.get("label", "region")
        seed = message.get("seed", 0)
        if not isinstance(seed, int):
            raise ProtocolError("bad_request", "seed must be an integer")
        try:
            entry = self.session.region_inpaint(self.session.lasso, label=str(label),
                                                seed=seed)
        except ValueError as exc:
            raise ProtocolError("no_intent", str(exc)) from None
        if entry is None:
            return {"ok": True, "stroke_ids": [], "stamps": 0}
        return {"ok": True, "stroke_ids": [entry.entry_id], "stamps": len(entry.stamps)}

    def _msg_refine(self, message: dict) -> dict:
        stroke_id = message.get("stroke_id")
        if not isinstance(stroke_id, int):
            raise ProtocolError("bad_request", "refine needs an integer stroke_id")
        try:
            job = self.session.dynamic_brush_refine(stroke_id)
        except KeyError as exc:
            raise ProtocolError("unknown_stroke", str(exc)) from None
        except ValueError as exc:
            raise ProtocolError("no_intent", str(exc)) from None
        return {"ok": True, "job_id": job.job_id}

    def _msg_undo(self, _message: dict) -> dict:
        return {"ok": True, "applied": self.session.undo()}

    def _msg_redo(self, _message: dict) -> dict:
        return {"ok": True, "applied": self.session.redo()}


class _Handler(BaseHTTPRequestHandler):
    hub: SessionHub = None
    static_dir: Path | None = None
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):  # quiet by default
        pass

    def _send_json(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_bytes(self, body: bytes, content_type: str) -> None:
        self.send_response(200)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length)

    def do_POST(self):
        path = urlparse(self.path).path
        try:
            if path == "/api/message":
                try:
                    message = json.loads(self._read_body().decode("utf-8"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    raise ProtocolError("bad_request", "body is not valid JSON") from None
                self._send_json(self.hub.handle(message))
            elif path == "/api/images":
                image_id = self.hub.store_image(self._read_body())
                self._send_json({"ok": True, "image_id": image_id})
            else:
                self._send_json({"type": "error", "code": "not_found",
                                 "message": path}, status=404)
        except ProtocolError as exc:
            self._send_json({"type": "error", "code": exc.code,
                             "message": str(exc)}, status=400)

    def do_GET(self):
        parsed = urlparse(self.path)
        path = parsed.path
        if path == "/api/events":
            query = parse_qs(parsed.query)
            since = int(query.get("since", ["0"])[0])
            timeout = float(query.get("timeout", ["10"])[0])
            events = self.hub.wait_events(since, timeout)
            self._send_json({"events": events, "next": since + len(events)})
        elif path == "/api/canvas.png":
            self._send_bytes(export_image(self.hub.session.snapshot_canvas()), "image/png")
        elif self.static_dir is not None:
            self._serve_static(path)
        else:
            self._send_json({"type": "error", "code": "not_found",
                             "message": path}, status=404)

    def _serve_static(self, path: str) -> None:
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            self._send_json({"type": "error", "code": "not_found",
                             "message": path}, status=404)
            return
        types = {".html": "text/html", ".js": "text/javascript",
                 ".css": "text/css", ".png": "image/png", ".map": "application/json"}
        self._send_bytes(target.read_bytes(),
                         types.get(target.suffix, "application/octet-stream"))


def create_server(session: Session, host: str = "127.0.0.1", port: int = 8765,
                  static_dir: str | Path | None = None) -> tuple[ThreadingHTTPServer, SessionHub]:
    """Build the HTTP server around a session; caller runs serve_forever()."""
    hub = SessionHub(session)
    handler = type("BoundHandler", (_Handler,), {
        "hub": hub,
        "static_dir": Path(static_dir) if static_dir else None,
    })
    server = ThreadingHTTPServer((host, port), handler)
    return server, hub
