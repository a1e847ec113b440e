"""File formats: session/plan JSON, PNG color management, and guidance maps.

Session (``.pcsession.json``) and plan (``.pcplan.json``) files are textual
JSON with a fixed key order and all floats printed with 9 significant digits,
so identical in-memory values always serialize to identical bytes and a
save/load/save cycle is byte-stable. Unknown fields survive a rewrite.

Loaders reject structurally invalid input with a :class:`SchemaError` naming
the offending field path. Numeric fields that are merely out of range are
clamped, with a warning recorded per event; the clamped fields are pressure,
color channels, and theta (wrapped into [-pi, pi]).

Canvas images are sRGB PNGs decoded to linear RGB on import and re-encoded on
export. Brush textures, attention maps, and label rasters are data rasters,
not color, and are loaded as raw normalized values without a transfer curve.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from PIL import Image

from .brush import BrushKind, BrushMode, Canvas, Stamp
from .strokes import StrokeRecord, TabletSample

SESSION_FORMAT = "pcsession"
PLAN_FORMAT = "pcplan"
SESSION_VERSION = 1
PLAN_VERSION = 1

SESSION_EXTENSION = ".pcsession.json"
PLAN_EXTENSION = ".pcplan.json"


class SchemaError(ValueError):
    """Structurally invalid document; the message carries the field path."""


# ---------------------------------------------------------------------------
# deterministic JSON writer (fixed key order, 9-significant-digit floats)

def _fmt_number(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite number {v}")
    return f"{v:.9g}"


def _dumps(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, int, float)):
        return _fmt_number(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (np.floating,)):
        return _fmt_number(float(obj))
    if isinstance(obj, (np.integer,)):
        return str(int(obj))
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _with_extras(known: dict, extra: dict) -> dict:
    out = dict(known)
    for k in sorted(extra):
        if k not in out:
            out[k] = extra[k]
    return out


# ---------------------------------------------------------------------------
# schema walking helpers

def _expect(doc, path: str, typ, what: str):
    if not isinstance(doc, typ) or isinstance(doc, bool) and typ is not bool:
        raise SchemaError(f"{path}: expected {what}")
    return doc


def _get(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}: missing field '{key}'")
    return doc[key]


def _number(doc: dict, key: str, path: str) -> float:
    v = _get(doc, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}: expected a number")
    if not math.isfinite(v):
        raise SchemaError(f"{path}.{key}: non-finite number")
    return float(v)


def _integer(doc: dict, key: str, path: str) -> int:
    v = _get(doc, key, path)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{path}.{key}: expected an integer")
    return v


def _clamp01(v: float, what: str, warnings: list[str]) -> float:
    if 0.0 <= v <= 1.0:
        return v
    warnings.append(f"{what} clamped from {v:.9g} into [0, 1]")
    return min(1.0, max(0.0, v))


def _wrap_theta(v: float, what: str, warnings: list[str]) -> float:
    if -math.pi <= v <= math.pi:
        return v
    warnings.append(f"{what} wrapped from {v:.9g} into [-pi, pi]")
    return math.atan2(math.sin(v), math.cos(v))


def _color_from(doc: dict, key: str, path: str, warnings: list[str]) -> tuple[float, float, float]:
    v = _get(doc, key, path)
    if not isinstance(v, list) or len(v) != 3:
        raise SchemaError(f"{path}.{key}: expected a 3-element color array")
    out = []
    for i, c in enumerate(v):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise SchemaError(f"{path}.{key}[{i}]: expected a finite number")
        out.append(_clamp01(float(c), f"{path}.{key}[{i}]", warnings))
    return tuple(out)


# ---------------------------------------------------------------------------
# brush mode and stamps

def _encode_mode(mode: BrushMode) -> dict:
    return {"mode": mode.kind.value, "texture": mode.texture_id}


def _decode_mode(doc: dict, path: str) -> BrushMode:
    name = _get(doc, "mode", path)
    try:
        kind = BrushKind(name)
    except ValueError:
        raise SchemaError(f"{path}.mode: unknown brush mode {name!r}") from None
    texture = doc.get("texture")
    if texture is not None and not isinstance(texture, str):
        raise SchemaError(f"{path}.texture: expected a string or null")
    return BrushMode(kind, texture) if kind is BrushKind.BRUSH_TIP else BrushMode(kind)


def encode_stamp(stamp: Stamp) -> dict:
    out = {"x": stamp.x, "y": stamp.y, "theta": stamp.theta, "color": list(stamp.color)}
    if stamp.mode.is_tip:
        out["r"] = stamp.r
        out["p"] = stamp.p
    else:
        out["sigma_x"] = stamp.sigma_x
        out["sigma_y"] = stamp.sigma_y
    return out


def decode_stamp(doc, mode: BrushMode, path: str, warnings: list[str]) -> Stamp:
    _expect(doc, path, dict, "a stamp object")
    x = _number(doc, "x", path)
    y = _number(doc, "y", path)
    theta = _wrap_theta(_number(doc, "theta", path), f"{path}.theta", warnings)
    color = _color_from(doc, "color", path, warnings)
    try:
        if mode.is_tip:
            r = _number(doc, "r", path)
            p = _clamp01(_number(doc, "p", path), f"{path}.p", warnings)
            return Stamp(mode=mode, x=x, y=y, theta=theta, color=color, r=r, p=p)
        return Stamp(mode=mode, x=x, y=y, theta=theta, color=color,
                     sigma_x=_number(doc, "sigma_x", path),
                     sigma_y=_number(doc, "sigma_y", path))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# session documents

@dataclass
class DocEntry:
    """One history entry: a recorded tablet stroke or a committed stamp group.

    A "stroke" entry normally replays by re-planning its record; when the
    entry's stamps were later rewritten (history optimization, refinement)
    they are stored explicitly and take precedence on replay. A stamp group
    may carry a selection clip mask that zeroes its alpha outside the mask.
    """

    kind: str                                # "stroke" or a stamp-group tag
    record: StrokeRecord | None = None
    stamps: tuple[Stamp, ...] | None = None
    mode: BrushMode | None = None            # brush mode of a stamp group
    clip_mask: np.ndarray | None = None      # (H, W) bool, canvas sized
    extra: dict = field(default_factory=dict)


def encode_mask(mask: np.ndarray) -> dict:
    """Compact selection-mask encoding: bbox plus a base64 grayscale PNG crop."""
    import base64

    rows, cols = np.nonzero(mask)
    y0, y1 = int(rows.min()), int(rows.max()) + 1
    x0, x1 = int(cols.min()), int(cols.max()) + 1
    crop = (mask[y0:y1, x0:x1] * np.uint8(255))
    img = Image.fromarray(crop, mode="L")
    buf = io.BytesIO()
    img.save(buf, "PNG")
    return {"x": x0, "y": y0, "w": x1 - x0, "h": y1 - y0,
            "png": base64.b64encode(buf.getvalue()).decode("ascii")}


def decode_mask(doc: dict, shape: tuple[int, int], path: str) -> np.ndarray:
    import base64

    for key in ("x", "y", "w", "h", "png"):
        if key not in doc:
            raise SchemaError(f"{path}: missing field '{key}'")
    try:
        crop = np.asarray(Image.open(io.BytesIO(base64.b64decode(doc["png"]))))
    except Exception:
        raise SchemaError(f"{path}.png: not a decodable mask") from None
    mask = np.zeros(shape, dtype=bool)
    y0, x0 = int(doc["y"]), int(doc["x"])
    mask[y0:y0 + crop.shape[0], x0:x0 + crop.shape[1]] = crop > 0
    return mask


@dataclass
class SessionDocument:
    width: int
    height: int
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)
    entries: list[DocEntry] = field(default_factory=list)
    textures: dict[str, str] = field(default_factory=dict)   # id -> content hash
    extra: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def texture_hash(texture: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(texture, dtype=np.float64))
    digest = hashlib.sha256()
    digest.update(str(arr.shape).encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()


def _encode_record(rec: StrokeRecord) -> dict:
    return {
        "type": "stroke",
        "tool": _encode_mode(rec.tool),
        "base_size": rec.base_size,
        "color": list(rec.color),
        "smoothing": rec.smoothing,
        "smoothing_coeffs": [0.7, 0.3],
        "samples": [{"x": s.x, "y": s.y, "pressure": s.pressure, "t": s.t}
                    for s in rec.samples],
    }


_RECORD_KEYS = {"type", "tool", "base_size", "color", "smoothing", "smoothing_coeffs",
                "samples", "stamps"}
_GROUP_KEYS = {"type", "kind", "brush", "stamps", "clip"}


def _decode_record(doc: dict, path: str, warnings: list[str]) -> tuple[StrokeRecord, dict]:
    tool = _decode_mode(_expect(_get(doc, "tool", path), f"{path}.tool", dict, "an object"),
                        f"{path}.tool")
    base_size = _number(doc, "base_size", path)
    if base_size <= 0:
        raise SchemaError(f"{path}.base_size: must be positive")
    color = _color_from(doc, "color", path, warnings)
    smoothing = _get(doc, "smoothing", path)
    if not isinstance(smoothing, bool):
        raise SchemaError(f"{path}.smoothing: expected a boolean")
    samples_doc = _expect(_get(doc, "samples", path), f"{path}.samples", list, "an array")
    if not samples_doc:
        raise SchemaError(f"{path}.samples: needs at least one sample")
    samples = []
    for i, s in enumerate(samples_doc):
        spath = f"{path}.samples[{i}]"
        _expect(s, spath, dict, "a sample object")
        samples.append(TabletSample(
            x=_number(s, "x", spath),
            y=_number(s, "y", spath),
            pressure=_clamp01(_number(s, "pressure", spath), f"{spath}.pressure", warnings),
            t=_number(s, "t", spath),
        ))
    try:
        rec = StrokeRecord(tool=tool, base_size=base_size, color=color,
                           samples=tuple(samples), smoothing=smoothing)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    extra = {k: v for k, v in doc.items() if k not in _RECORD_KEYS}
    return rec, extra


def stroke_record_from_json(doc: dict, path: str = "stroke") -> tuple[StrokeRecord, list[str]]:
    """Decode a single stroke object (the wire-protocol ``stroke`` payload)."""
    warnings: list[str] = []
    _expect(doc, path, dict, "an object")
    rec, _extra = _decode_record(doc, path, warnings)
    return rec, warnings


def save_session(doc: SessionDocument) -> bytes:
    entries = []
    for i, entry in enumerate(doc.entries):
        if entry.kind == "stroke":
            if entry.record is None:
                raise ValueError(f"entry {i}: stroke entries need a record")
            body = _encode_record(entry.record)
            if entry.stamps is not None:
                body["stamps"] = [encode_stamp(s) for s in entry.stamps]
            entries.append(_with_extras(body, entry.extra))
        else:
            if entry.stamps is None or entry.mode is None:
                raise ValueError(f"entry {i}: stamp-group entries need stamps and a mode")
            body = {
                "type": "stamps",
                "kind": entry.kind,
                "brush": _encode_mode(entry.mode),
                "stamps": [encode_stamp(s) for s in entry.stamps],
            }
            if entry.clip_mask is not None:
                body["clip"] = encode_mask(entry.clip_mask)
            entries.append(_with_extras(body, entry.extra))
    body = {
        "format": SESSION_FORMAT,
        "version": SESSION_VERSION,
        "canvas": {"width": doc.width, "height": doc.height,
                   "background": list(doc.background)},
        "textures": {k: doc.textures[k] for k in sorted(doc.textures)},
        "strokes": entries,
    }
    return (_dumps(_with_extras(body, doc.extra)) + "\n").encode("utf-8")


def load_session(data: bytes) -> SessionDocument:
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"document: not valid JSON ({exc})") from None
    _expect(raw, "document", dict, "an object")
    fmt = _get(raw, "format", "document")
    if fmt != SESSION_FORMAT:
        raise SchemaError(f"document.format: expected {SESSION_FORMAT!r}, got {fmt!r}")
    version = _integer(raw, "version", "document")
    if version != SESSION_VERSION:
        raise SchemaError(f"document.version: unsupported version {version}")
    warnings: list[str] = []
    canvas = _expect(_get(raw, "canvas", "document"), "document.canvas", dict, "an object")
    width = _integer(canvas, "width", "document.canvas")
    height = _integer(canvas, "height", "document.canvas")
    if width < 1 or height < 1:
        raise SchemaError("document.canvas: width and height must be positive")
    background = _color_from(canvas, "background", "document.canvas", warnings)
    textures_doc = _expect(_get(raw, "textures", "document"), "document.textures", dict, "an object")
    textures = {}
    for k, v in textures_doc.items():
        if not isinstance(v, str):
            raise SchemaError(f"document.textures.{k}: expected a hash string")
        textures[str(k)] = v
    strokes_doc = _expect(_get(raw, "strokes", "document"), "document.strokes", list, "an array")
    entries = []
    for i, entry_doc in enumerate(strokes_doc):
        path = f"document.strokes[{i}]"
        _expect(entry_doc, path, dict, "an object")
        etype = _get(entry_doc, "type", path)
        if etype == "stroke":
            rec, extra = _decode_record(entry_doc, path, warnings)
            stamps = None
            if "stamps" in entry_doc:
                stamps_doc = _expect(entry_doc["stamps"], f"{path}.stamps", list, "an array")
                stamps = tuple(decode_stamp(s, rec.tool, f"{path}.stamps[{j}]", warnings)
                               for j, s in enumerate(stamps_doc))
            entries.append(DocEntry(kind="stroke", record=rec, stamps=stamps, extra=extra))
        elif etype == "stamps":
            kind = _get(entry_doc, "kind", path)
            if not isinstance(kind, str):
                raise SchemaError(f"{path}.kind: expected a string")
            mode = _decode_mode(_expect(_get(entry_doc, "brush", path), f"{path}.brush",
                                        dict, "an object"), f"{path}.brush")
            stamps_doc = _expect(_get(entry_doc, "stamps", path), f"{path}.stamps",
                                 list, "an array")
            stamps = tuple(decode_stamp(s, mode, f"{path}.stamps[{j}]", warnings)
                           for j, s in enumerate(stamps_doc))
            clip = None
            if "clip" in entry_doc:
                clip = decode_mask(_expect(entry_doc["clip"], f"{path}.clip", dict,
                                           "an object"),
                                   (height, width), f"{path}.clip")
            extra = {k: v for k, v in entry_doc.items() if k not in _GROUP_KEYS}
            entries.append(DocEntry(kind=kind, stamps=stamps, mode=mode,
                                    clip_mask=clip, extra=extra))
        else:
            raise SchemaError(f"{path}.type: unknown entry type {etype!r}")
    known = {"format", "version", "canvas", "textures", "strokes"}
    extra = {k: v for k, v in raw.items() if k not in known}
    return SessionDocument(width=width, height=height, background=background,
                           entries=entries, textures=textures, extra=extra,
                           warnings=warnings)


# ---------------------------------------------------------------------------
# stroke plans

@dataclass
class StrokePlan:
    """Ordered, fully parameterized stamp sequence plus optional annotations."""

    width: int
    height: int
    mode: BrushMode
    stamps: list[Stamp] = field(default_factory=list)
    annotations: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def save_plan(plan: StrokePlan) -> bytes:
    body = {
        "format": PLAN_FORMAT,
        "version": PLAN_VERSION,
        "canvas": {"width": plan.width, "height": plan.height},
        "brush": _encode_mode(plan.mode),
        "count": len(plan.stamps),
        "stamps": [],
        "annotations": plan.annotations,
    }
    for stamp in plan.stamps:
        enc = encode_stamp(stamp)
        if stamp.mode != plan.mode:
            enc = {"brush": _encode_mode(stamp.mode), **enc}
        body["stamps"].append(enc)
    return (_dumps(_with_extras(body, plan.extra)) + "\n").encode("utf-8")


def load_plan(data: bytes) -> StrokePlan:
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"document: not valid JSON ({exc})") from None
    _expect(raw, "document", dict, "an object")
    fmt = _get(raw, "format", "document")
    if fmt != PLAN_FORMAT:
        raise SchemaError(f"document.format: expected {PLAN_FORMAT!r}, got {fmt!r}")
    version = _integer(raw, "version", "document")
    if version != PLAN_VERSION:
        raise SchemaError(f"document.version: unsupported version {version}")
    warnings: list[str] = []
    canvas = _expect(_get(raw, "canvas", "document"), "document.canvas", dict, "an object")
    width = _integer(canvas, "width", "document.canvas")
    height = _integer(canvas, "height", "document.canvas")
    mode = _decode_mode(_expect(_get(raw, "brush", "document"), "document.brush",
                                dict, "an object"), "document.brush")
    count = _integer(raw, "count", "document")
    stamps_doc = _expect(_get(raw, "stamps", "document"), "document.stamps", list, "an array")
    if count != len(stamps_doc):
        raise SchemaError(f"document.count: header says {count} stamps, body has {len(stamps_doc)}")
    stamps = []
    for i, sdoc in enumerate(stamps_doc):
        path = f"document.stamps[{i}]"
        _expect(sdoc, path, dict, "a stamp object")
        smode = mode
        if "brush" in sdoc:
            smode = _decode_mode(sdoc["brush"], f"{path}.brush")
        stamps.append(decode_stamp(sdoc, smode, path, warnings))
    annotations = raw.get("annotations", {})
    if not isinstance(annotations, dict):
        raise SchemaError("document.annotations: expected an object")
    known = {"format", "version", "canvas", "brush", "count", "stamps", "annotations"}
    extra = {k: v for k, v in raw.items() if k not in known}
    return StrokePlan(width=width, height=height, mode=mode, stamps=stamps,
                      annotations=annotations, extra=extra, warnings=warnings)


# ---------------------------------------------------------------------------
# images and color management

def srgb_to_linear(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(v: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1.0 / 2.4) - 0.055)


def _decode_png(data: bytes) -> np.ndarray:
    arr = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ValueError("not a decodable PNG")
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"unsupported bit depth: {arr.dtype}")
    return arr.astype(np.float64) / scale


def import_image(data: bytes) -> Canvas:
    """Decode an 8- or 16-bit PNG into a linear-RGB canvas.

    Grayscale images are broadcast to RGB; an alpha channel is dropped.
    """
    arr = _decode_png(data)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.shape[2] == 4:
        arr = arr[:, :, :3]
    elif arr.shape[2] != 3:
        raise ValueError(f"unsupported channel count: {arr.shape[2]}")
    return srgb_to_linear(arr[:, :, ::-1])  # BGR -> RGB


def export_image(canvas: Canvas, bit_depth: int = 8) -> bytes:
    """Encode a linear-RGB canvas as an sRGB PNG (8- or 16-bit)."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    srgb = linear_to_srgb(canvas)
    if bit_depth == 8:
        quant = np.round(srgb * 255.0).astype(np.uint8)
    else:
        quant = np.round(srgb * 65535.0).astype(np.uint16)
    ok, buf = cv2.imencode(".png", quant[:, :, ::-1])
    if not ok:
        raise ValueError("PNG encoding failed")
    return buf.tobytes()


def load_gray(data: bytes) -> np.ndarray:
    """Decode a grayscale PNG as raw normalized values in [0, 1] (no EOTF);
    RGB inputs are reduced to Rec. 709 luminance. Used for brush tips and
    attention maps."""
    arr = _decode_png(data)
    if arr.ndim == 3:
        arr = arr[:, :, :3][:, :, ::-1] @ np.array([0.2126, 0.7152, 0.0722])
    return arr


# ---------------------------------------------------------------------------
# guidance maps and the label order table

@dataclass(frozen=True)
class OrderEntry:
    label_id: int
    name: str
    ignore: bool = False


def parse_order_table(text: str) -> list[OrderEntry]:
    """One ``id name [ignore]`` per line, coarsest first; ``#`` comments."""
    entries = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) < 2:
            raise SchemaError(f"order table line {lineno}: expected 'id name [ignore]'")
        try:
            label_id = int(parts[0])
        except ValueError:
            raise SchemaError(f"order table line {lineno}: bad label id {parts[0]!r}") from None
        if label_id in seen:
            raise SchemaError(f"order table line {lineno}: duplicate label id {label_id}")
        seen.add(label_id)
        ignore = parts[-1].lower() == "ignore"
        name = " ".join(parts[1:-1] if ignore else parts[1:])
        if not name:
            raise SchemaError(f"order table line {lineno}: missing label name")
        entries.append(OrderEntry(label_id=label_id, name=name, ignore=ignore))
    if len([e for e in entries if not e.ignore]) > 15:
        raise SchemaError("order table: more than 15 active labels")
    return entries


def load_label_png(data: bytes) -> np.ndarray:
    """Label ids from a paletted PNG (palette indices) or a grayscale PNG (values)."""
    img = Image.open(io.BytesIO(data))
    if img.mode == "P":
        return np.asarray(img, dtype=np.int64)
    if img.mode in ("L", "I", "I;16"):
        return np.asarray(img, dtype=np.int64)
    raise ValueError(f"label PNG must be paletted or grayscale, got mode {img.mode!r}")


def load_maps(label_png: bytes, normal_png: bytes, attention_png: bytes,
              order_table: str):
    """Load and validate the three guidance rasters for the stroke sequencer.

    Returns ``(LabelMap, NormalMap, AttentionMap, warnings)``. Normals are
    decoded from [0,1] encoding to unit vectors; attention is min-max scaled
    (an all-constant map degenerates to all ones).
    """
    from .sequencer import AttentionMap, LabelMap, NormalMap

    warnings: list[str] = []
    entries = parse_order_table(order_table)
    labels = load_label_png(label_png)
    normal_raw = _decode_png(normal_png)
    if normal_raw.ndim != 3 or normal_raw.shape[2] < 3:
        raise ValueError("normal map must be a 3-channel PNG")
    normal_raw = normal_raw[:, :, :3][:, :, ::-1]  # BGR -> RGB
    attention_raw = load_gray(attention_png)

    shapes = {labels.shape, normal_raw.shape[:2], attention_raw.shape}
    if len(shapes) != 1:
        raise ValueError(f"map dimensions do not match: {sorted(shapes)}")

    table_ids = {e.label_id for e in entries}
    present = np.unique(labels)
    missing = [int(v) for v in present if int(v) not in table_ids]
    if missing:
        raise SchemaError(f"label ids {missing} absent from the order table")

    vectors = normal_raw * 2.0 - 1.0
    norms = np.linalg.norm(vectors, axis=2)
    degenerate = norms < 1e-6
    if degenerate.any():
        warnings.append(f"{int(degenerate.sum())} zero-length normals replaced by (0, 0, 1)")
        vectors[degenerate] = (0.0, 0.0, 1.0)
        norms = np.linalg.norm(vectors, axis=2)
    vectors = vectors / norms[:, :, None]

    amin, amax = float(attention_raw.min()), float(attention_raw.max())
    if amax - amin < 1e-12:
        attention = np.ones_like(attention_raw)
    else:
        attention = (attention_raw - amin) / (amax - amin)

    order = [e.label_id for e in entries if not e.ignore]
    ignored = frozenset(e.label_id for e in entries if e.ignore)
    names = {e.label_id: e.name for e in entries}
    return (LabelMap(raster=labels, order=order, ignored=ignored, names=names),
            NormalMap(vectors=vectors),
            AttentionMap(weights=attention),
            warnings)
