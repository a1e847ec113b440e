"""Recorded strokes and their expansion into stamp sequences.

A stroke is a pen-down..pen-up sequence of tablet samples (position, pressure,
timestamp). Rendering walks a uniform Catmull-Rom spline through the samples
and drops a stamp whenever the accumulated travel distance reaches
``tau = 0.05 * r`` at the live pressure-driven radius. Stroke angle comes from
the displacement between consecutive stamps (y axis points down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .brush import (
    BrushKind,
    BrushMode,
    Canvas,
    PressureConfig,
    Stamp,
    radius_from_pressure,
    render_stamps,
    smooth_pressure,
)

# Spacing rule: a stamp is emitted once accumulated travel reaches this
# fraction of the current radius.
SPACING_FRACTION = 0.05

# Nominal chord length of the dense spline walk, in pixels.
WALK_STEP = 0.25


@dataclass(frozen=True)
class TabletSample:
    """One tablet event: canvas position, pressure in [0, 1], milliseconds
    since stroke start (nondecreasing within a stroke)."""

    x: float
    y: float
    pressure: float
    t: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.pressure <= 1.0):
            raise ValueError(f"pressure must be in [0, 1], got {self.pressure}")
        if not math.isfinite(self.x) or not math.isfinite(self.y):
            raise ValueError("sample position must be finite")


@dataclass(frozen=True)
class StrokeRecord:
    """Brush metadata plus the ordered tablet samples of one stroke."""

    tool: BrushMode
    base_size: float
    color: tuple[float, float, float]
    samples: tuple[TabletSample, ...]
    smoothing: bool = True

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("a stroke needs at least one sample")
        if not self.base_size > 0:
            raise ValueError(f"base_size must be positive, got {self.base_size}")
        ts = [s.t for s in self.samples]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample timestamps must be nondecreasing")


@dataclass(frozen=True)
class SplineSegment:
    """Four control samples; evaluation at t in [0, 1] spans P1 -> P2.
    Each control is (x, y, pressure)."""

    p0: tuple[float, float, float]
    p1: tuple[float, float, float]
    p2: tuple[float, float, float]
    p3: tuple[float, float, float]


def _catmull_rom_weights(t: float) -> tuple[float, float, float, float]:
    # uniform Catmull-Rom basis (tension 1/2)
    t2 = t * t
    t3 = t2 * t
    return (
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    )


def eval_catmull_rom(seg: SplineSegment, t: float) -> tuple[tuple[float, float], float]:
    """Evaluate position and pressure at parameter t in [0, 1].

    Position and pressure share the same basis; pressure is clamped to [0, 1]
    afterwards since the spline can overshoot.
    """
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must be in [0, 1], got {t}")
    w0, w1, w2, w3 = _catmull_rom_weights(t)
    pts = (seg.p0, seg.p1, seg.p2, seg.p3)
    x = w0 * pts[0][0] + w1 * pts[1][0] + w2 * pts[2][0] + w3 * pts[3][0]
    y = w0 * pts[0][1] + w1 * pts[1][1] + w2 * pts[2][1] + w3 * pts[3][1]
    p = w0 * pts[0][2] + w1 * pts[1][2] + w2 * pts[2][2] + w3 * pts[3][2]
    return (x, y), min(1.0, max(0.0, p))


def smoothed_pressures(stroke: StrokeRecord) -> list[float]:
    """Per-sample pressures after the exponential smoother (or raw when the
    stroke has smoothing disabled). The smoother is seeded with the first raw
    sample to avoid startup lag."""
    raw = [s.pressure for s in stroke.samples]
    if not stroke.smoothing:
        return raw
    out = [raw[0]]
    for p in raw[1:]:
        out.append(smooth_pressure(out[-1], p))
    return out


def _segments(stroke: StrokeRecord, pressures: Sequence[float]) -> list[SplineSegment]:
    # duplicate first/last samples so every span has a full 4-point window
    pts = [(s.x, s.y, p) for s, p in zip(stroke.samples, pressures)]
    ext = [pts[0]] + pts + [pts[-1]]
    return [SplineSegment(ext[i], ext[i + 1], ext[i + 2], ext[i + 3])
            for i in range(len(pts) - 1)]


def _dense_walk(seg: SplineSegment, step: float) -> list[tuple[float, float, float]]:
    """Points along one segment (excluding t=0) with every sub-chord <= step.

    Subdivision doubles until the longest chord fits, since the spline's
    nonuniform parametrization makes an arc-length estimate alone unreliable.
    """
    n = 4
    while True:
        pts = [eval_catmull_rom(seg, k / n) for k in range(n + 1)]
        longest = max(math.hypot(b[0][0] - a[0][0], b[0][1] - a[0][1])
                      for a, b in zip(pts, pts[1:]))
        if longest <= step or n >= 1 << 14:
            break
        n *= 2
    return [(x, y, p) for (x, y), p in pts[1:]]


def _make_stamp(tool: BrushMode, x: float, y: float, theta: float, p: float,
                color: tuple[float, float, float], cfg: PressureConfig) -> Stamp:
    r = radius_from_pressure(p, cfg)
    if tool.kind is BrushKind.GAUSSIAN:
        # Gaussian brush has no pressure channel; map the live radius to an
        # isotropic sigma so tablet input still drives stamp size.
        sigma = max(r / 2.0, 1e-3)
        return Stamp(mode=tool, x=x, y=y, theta=theta, color=color,
                     sigma_x=sigma, sigma_y=sigma)
    return Stamp(mode=tool, x=x, y=y, theta=theta, color=color, r=r, p=p)


def plan_stamps(stroke: StrokeRecord, cfg: PressureConfig,
                walk_step: float = WALK_STEP) -> list[Stamp]:
    """Expand a stroke into its ordered stamp sequence.

    The first stamp sits on the first sample with theta = 0. After that the
    spline is walked densely and a stamp is emitted whenever accumulated chord
    distance since the last stamp reaches tau = 0.05 * r(smoothed pressure at
    the candidate point); theta is the heading from the previous stamp.
    """
    pressures = smoothed_pressures(stroke)
    first = stroke.samples[0]
    stamps = [_make_stamp(stroke.tool, first.x, first.y, 0.0, pressures[0],
                          stroke.color, cfg)]
    if len(stroke.samples) == 1:
        return stamps

    last_x, last_y = first.x, first.y
    prev_x, prev_y = first.x, first.y
    acc = 0.0
    for seg in _segments(stroke, pressures):
        for x, y, p in _dense_walk(seg, walk_step):
            acc += math.hypot(x - prev_x, y - prev_y)
            prev_x, prev_y = x, y
            tau = SPACING_FRACTION * radius_from_pressure(p, cfg)
            if acc >= tau:
                theta = math.atan2(y - last_y, x - last_x)
                stamps.append(_make_stamp(stroke.tool, x, y, theta, p,
                                          stroke.color, cfg))
                last_x, last_y = x, y
                acc = 0.0
    return stamps


def render_stroke(canvas: Canvas, stroke: StrokeRecord, cfg: PressureConfig,
                  textures: Mapping[str, np.ndarray] | None = None) -> Canvas:
    """Render one stroke: plan its stamps and alpha-over composite them in order."""
    return render_stamps(canvas, plan_stamps(stroke, cfg), textures=textures)


def is_mouse_session(session: Sequence[StrokeRecord], threshold: float = 0.99) -> bool:
    """Detect degenerate constant-pressure input (mouse rather than stylus).

    True iff the fraction of samples sitting exactly at the session's modal
    pressure value strictly exceeds ``threshold``.
    """
    if len(session) < 1:
        raise ValueError("need at least one stroke")
    pressures = np.concatenate([[s.pressure for s in stroke.samples]
                                for stroke in session]).astype(np.float64)
    _, counts = np.unique(pressures, return_counts=True)
    return bool(counts.max() / pressures.size > threshold)
