"""Deterministic stand-ins for the learned models, plus the flow-matching math.

The engine's AI seams are plain callables so trained models can be mounted
later without touching the session machinery:

* :class:`IntentProvider` supplies a predicted target image for the current
  canvas; the built-in :class:`ReferenceOracle` simply returns a user-loaded
  reference.
* :func:`propose_next_stroke` is a greedy, fully deterministic next-stroke
  policy: paint the largest canvas-vs-intent residual with the intent's color,
  coarse-to-fine sizing, stroke angle from the local intent gradient.
* :func:`fm_pair` and :func:`euler_integrate` implement straight-line flow
  matching targets and Euler-step sampling over a pluggable velocity field.

Stroke vectors are 8-dimensional: (x, y, p, r, theta, R, G, B), every slot
normalized to [0, 1] (theta mapped affinely from [-pi, pi]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .brush import BrushKind, BrushMode, Canvas, Stamp
from .metrics import luminance

STROKE_DIMS = 8

# velocity field signature: v(a, context, t) -> (8,) array
VelocityField = Callable[[np.ndarray, object, float], np.ndarray]


@runtime_checkable
class IntentProvider(Protocol):
    """Source of the predicted target image for a given canvas state."""

    def predict(self, canvas: Canvas) -> Canvas: ...


@dataclass(frozen=True)
class ReferenceOracle:
    """Intent provider that always answers with a fixed reference image."""

    reference: np.ndarray

    def predict(self, canvas: Canvas) -> Canvas:
        return intent_reference(canvas, self.reference)


def intent_reference(canvas: Canvas, reference: Canvas) -> Canvas:
    """Oracle intent: the reference itself. The canvas argument only fixes the
    provider signature (and the dimension contract)."""
    if canvas.shape != reference.shape:
        raise ValueError(f"dimension mismatch: {canvas.shape} vs {reference.shape}")
    return reference


@dataclass(frozen=True)
class StrokeSpace:
    """Normalization between canvas-space stamps and unit stroke vectors."""

    width: int
    height: int
    r_max: float

    def to_vector(self, stamp: Stamp) -> np.ndarray:
        if stamp.mode.is_tip:
            r, p = float(stamp.r), float(stamp.p)
        else:
            # Gaussian stamps: radius slot carries the 2-sigma extent
            r, p = 2.0 * float(max(stamp.sigma_x, stamp.sigma_y)), 0.8
        vec = np.array([
            stamp.x / self.width,
            stamp.y / self.height,
            p,
            r / self.r_max,
            (stamp.theta + math.pi) / (2.0 * math.pi),
            *stamp.color,
        ])
        return np.clip(vec, 0.0, 1.0)

    def to_stamp(self, vec: np.ndarray, mode: BrushMode) -> Stamp:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (STROKE_DIMS,):
            raise ValueError(f"stroke vector must have {STROKE_DIMS} slots")
        if vec.min() < 0.0 or vec.max() > 1.0:
            raise ValueError("stroke vector slots must be in [0, 1]")
        x = float(vec[0]) * self.width
        y = float(vec[1]) * self.height
        p = float(vec[2])
        r = max(float(vec[3]) * self.r_max, 0.25)
        theta = float(vec[4]) * 2.0 * math.pi - math.pi
        color = tuple(float(c) for c in vec[5:8])
        if mode.kind is BrushKind.GAUSSIAN:
            sigma = r / 2.0
            return Stamp(mode=mode, x=x, y=y, theta=theta, color=color,
                         sigma_x=sigma, sigma_y=sigma)
        return Stamp(mode=mode, x=x, y=y, theta=theta, color=color,
                     r=r, p=max(p, 0.01))


def fm_pair(a_src: np.ndarray, a_tar: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Straight-line flow matching pair: the point a_t = (1-t) a_src + t a_tar
    and its constant velocity target u_t = a_tar - a_src."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must be in [0, 1], got {t}")
    a_src = np.asarray(a_src, dtype=np.float64)
    a_tar = np.asarray(a_tar, dtype=np.float64)
    return (1.0 - t) * a_src + t * a_tar, a_tar - a_src


def euler_integrate(a0: np.ndarray, field: VelocityField, context=None,
                    steps: int = 10) -> np.ndarray:
    """Integrate the velocity field from t=0 to t=1 with fixed Euler steps.

    The state is clamped to [0, 1]^8 only after the final step; intermediate
    states travel in unconstrained parameter space.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    a = np.asarray(a0, dtype=np.float64).copy()
    dt = 1.0 / steps
    for k in range(steps):
        v = np.asarray(field(a, context, k * dt), dtype=np.float64)
        if v.shape != a.shape:
            raise ValueError(f"velocity shape {v.shape} does not match state {a.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("velocity field returned non-finite values")
        a = a + dt * v
    return np.clip(a, 0.0, 1.0)


def straight_line_field(a_src: np.ndarray, a_tar: np.ndarray) -> VelocityField:
    """The constant straight-line velocity a_tar - a_src; integrating it from
    a_src lands exactly on a_tar for any Euler step count."""
    u = np.asarray(a_tar, dtype=np.float64) - np.asarray(a_src, dtype=np.float64)

    def field(_a, _context, _t):
        return u

    return field


@dataclass(frozen=True)
class ProposerConfig:
    """Greedy proposer settings: coarse-to-fine radius schedule and pressure."""

    r_start_frac: float = 0.125     # starting radius as a fraction of min(H, W)
    r_end_px: float = 2.0
    pressure: float = 0.8
    complete_eps: float = 1e-12     # max residual at or below this means done
    r_max_frac: float = 0.5         # stroke-vector radius normalization


def stroke_space_for(canvas: Canvas, cfg: ProposerConfig | None = None) -> StrokeSpace:
    cfg = cfg or ProposerConfig()
    H, W = canvas.shape[:2]
    return StrokeSpace(width=W, height=H, r_max=cfg.r_max_frac * min(H, W))


def propose_next_stroke(canvas: Canvas, intent: Canvas,
                        history: Sequence[Stamp] = (),
                        mask: np.ndarray | None = None,
                        progress: float = 0.0,
                        cfg: ProposerConfig | None = None) -> np.ndarray | None:
    """Greedy next-stroke proposal as a normalized stroke vector, or None when
    the canvas already matches the intent (inside the mask, if given).

    Position: argmax squared residual (row-major first on ties), restricted to
    the mask. Color: the intent pixel there. Radius: linear in ``progress``
    between the configured coarse and fine bounds. Angle: direction of the
    local intent luminance gradient. ``history`` is accepted for interface
    parity with learned predictors; this policy does not use it.
    """
    cfg = cfg or ProposerConfig()
    if canvas.shape != intent.shape:
        raise ValueError(f"dimension mismatch: {canvas.shape} vs {intent.shape}")
    if not (0.0 <= progress <= 1.0):
        raise ValueError(f"progress must be in [0, 1], got {progress}")
    H, W = canvas.shape[:2]
    residual = np.sum((canvas - intent) ** 2, axis=2)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (H, W):
            raise ValueError("mask dimensions do not match the canvas")
        if not mask.any():
            raise ValueError("mask is empty")
        residual = np.where(mask, residual, -1.0)
    flat = int(np.argmax(residual))
    row, col = flat // W, flat % W
    if residual[row, col] <= cfg.complete_eps:
        return None

    lum = luminance(intent)
    gx = (lum[row, min(col + 1, W - 1)] - lum[row, max(col - 1, 0)]) / 2.0
    gy = (lum[min(row + 1, H - 1), col] - lum[max(row - 1, 0), col]) / 2.0
    theta = math.atan2(gy, gx) if (gx != 0.0 or gy != 0.0) else 0.0

    r_start = cfg.r_start_frac * min(H, W)
    radius = r_start + (cfg.r_end_px - r_start) * progress
    space = stroke_space_for(canvas, cfg)
    color = np.clip(intent[row, col], 0.0, 1.0)
    vec = np.array([
        (col + 0.5) / W,
        (row + 0.5) / H,
        cfg.pressure,
        radius / space.r_max,
        (theta + math.pi) / (2.0 * math.pi),
        color[0], color[1], color[2],
    ])
    return np.clip(vec, 0.0, 1.0)
