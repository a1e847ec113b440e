"""Deterministic synthetic fixtures: a portrait-like test image with matching
label, normal, and attention rasters.

Everything here is procedural so the shipped fixture PNGs (assets/fixtures)
can be regenerated bit-identically with scripts/make_fixtures.py.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .formats import export_image
from .sequencer import AttentionMap, LabelMap, NormalMap

LABEL_ORDER = (
    (0, "background"),
    (1, "hair"),
    (2, "face"),
    (3, "nose"),
    (4, "mouth"),
    (5, "eyes"),
)

_PALETTE = {
    0: (40, 60, 75),
    1: (70, 40, 25),
    2: (225, 180, 150),
    3: (200, 150, 120),
    4: (170, 60, 70),
    5: (35, 30, 40),
}


def _ellipse(xx, yy, cx, cy, ax, ay):
    return ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1.0


def synthetic_portrait(size: int = 128):
    """Portrait-ish target plus guidance maps, all derived analytically.

    Returns ``(target, labels, normals, attention)`` with the target in
    linear RGB.
    """
    H = W = size
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    cx, cy = W / 2.0, H * 0.52
    face_ax, face_ay = W * 0.26, H * 0.34

    labels = np.zeros((H, W), dtype=np.int64)
    hair = _ellipse(xx, yy, cx, cy - H * 0.10, W * 0.32, H * 0.36)
    face = _ellipse(xx, yy, cx, cy, face_ax, face_ay)
    labels[hair] = 1
    labels[face] = 2
    nose = _ellipse(xx, yy, cx, cy + H * 0.04, W * 0.035, H * 0.09)
    mouth = _ellipse(xx, yy, cx, cy + H * 0.20, W * 0.09, H * 0.03)
    eye_l = _ellipse(xx, yy, cx - W * 0.11, cy - H * 0.06, W * 0.045, H * 0.025)
    eye_r = _ellipse(xx, yy, cx + W * 0.11, cy - H * 0.06, W * 0.045, H * 0.025)
    labels[nose] = 3
    labels[mouth] = 4
    labels[eye_l | eye_r] = 5

    # target: flat region colors with smooth shading over the face/background
    target = np.zeros((H, W, 3), dtype=np.float64)
    for label_id, rgb in _PALETTE.items():
        target[labels == label_id] = np.asarray(rgb, dtype=np.float64) / 255.0
    backdrop = 0.55 + 0.45 * (yy / H)
    target[labels == 0] *= backdrop[labels == 0][:, None]
    light = np.clip(1.15 - 0.9 * np.hypot((xx - cx * 0.8) / W, (yy - cy * 0.7) / H), 0.35, 1.1)
    target *= light[:, :, None]
    waves = 0.04 * np.sin(xx * 0.55 + yy * 0.2)
    target[labels == 1] = np.clip(target[labels == 1] + waves[labels == 1][:, None], 0, 1)
    target = np.clip(target, 0.0, 1.0)

    # normals: sphere over the face, ripples in the hair, flat elsewhere
    nx = np.zeros((H, W))
    ny = np.zeros((H, W))
    nz = np.ones((H, W))
    u = (xx - cx) / face_ax
    v = (yy - cy) / face_ay
    inside = u * u + v * v <= 1.0
    nx[inside] = u[inside]
    ny[inside] = v[inside]
    nz[inside] = np.sqrt(np.clip(1.0 - u[inside] ** 2 - v[inside] ** 2, 0.0, 1.0))
    nx[hair & ~face] = 0.35 * np.sin(xx[hair & ~face] * 0.7)
    ny[hair & ~face] = 0.35 * np.cos(yy[hair & ~face] * 0.7)
    vecs = np.stack([nx, ny, nz], axis=2)
    vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)

    # attention: strong at the eyes, moderate at mouth/nose, weak elsewhere
    def blob(px, py, sigma):
        return np.exp(-(((xx - px) ** 2 + (yy - py) ** 2) / (2.0 * sigma ** 2)))

    attention = (0.05
                 + 1.0 * blob(cx - W * 0.11, cy - H * 0.06, W * 0.05)
                 + 1.0 * blob(cx + W * 0.11, cy - H * 0.06, W * 0.05)
                 + 0.6 * blob(cx, cy + H * 0.20, W * 0.07)
                 + 0.4 * blob(cx, cy + H * 0.04, W * 0.06)
                 + 0.15 * blob(cx, cy, W * 0.25))
    attention /= attention.max()

    label_map = LabelMap(raster=labels, order=[i for i, _ in LABEL_ORDER],
                         names=dict(LABEL_ORDER))
    return target, label_map, NormalMap(vectors=vecs), AttentionMap(weights=attention)


def order_table_text() -> str:
    lines = ["# label order, coarsest first"]
    lines += [f"{i} {name}" for i, name in LABEL_ORDER]
    return "\n".join(lines) + "\n"


def encode_labels_png(raster: np.ndarray) -> bytes:
    img = Image.fromarray(raster.astype(np.uint8), mode="P")
    palette = []
    for i in range(256):
        palette.extend(_PALETTE.get(i, (0, 0, 0)))
    img.putpalette(palette)
    buf = io.BytesIO()
    img.save(buf, "PNG")
    return buf.getvalue()


def encode_normals_png(vectors: np.ndarray) -> bytes:
    encoded = np.clip((vectors + 1.0) / 2.0, 0.0, 1.0)
    quant = np.round(encoded * 65535.0).astype(np.uint16)
    import cv2
    ok, buf = cv2.imencode(".png", quant[:, :, ::-1])
    if not ok:
        raise ValueError("normal map encoding failed")
    return buf.tobytes()


def encode_attention_png(weights: np.ndarray) -> bytes:
    img = Image.fromarray(np.round(np.clip(weights, 0, 1) * 255).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, "PNG")
    return buf.getvalue()


def write_fixtures(directory: str | Path, size: int = 128) -> dict[str, Path]:
    """Write the portrait fixture set into a directory; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    target, labels, normals, attention = synthetic_portrait(size)
    paths = {
        "target": directory / f"portrait_{size}.png",
        "labels": directory / f"labels_{size}.png",
        "normals": directory / f"normals_{size}.png",
        "attention": directory / f"attention_{size}.png",
        "order": directory / f"labels_{size}.order.txt",
    }
    paths["target"].write_bytes(export_image(target))
    paths["labels"].write_bytes(encode_labels_png(labels.raster))
    paths["normals"].write_bytes(encode_normals_png(normals.vectors))
    paths["attention"].write_bytes(encode_attention_png(attention.weights))
    paths["order"].write_text(order_table_text())
    return paths


def fixture_dir() -> Path:
    """Location of the committed fixture PNGs (repo root / assets / fixtures)."""
    return Path(__file__).resolve().parents[2] / "assets" / "fixtures"
