"""Brush parameterizations, pressure curves, stamp alpha maps, and compositing.

Three brush modes are supported:

* ``HARD_ROUND``: a procedural disk. Binary edge at display time; an optional
  ``soften`` width smooths the rim so the stamp stays differentiable during
  optimization.
* ``BRUSH_TIP``: an arbitrary grayscale texture warped onto the canvas by an
  affine transform (translate, rotate, uniform scale to diameter ``2r``).
* ``GAUSSIAN``: an anisotropic Gaussian footprint parameterized by per-axis
  standard deviations; pressure is not used in this mode.

Coordinate conventions used throughout the package:

* canvases are ``(H, W, 3)`` float64 arrays holding linear RGB in [0, 1];
* pixel ``(row, col)`` has its center at ``(x, y) = (col + 0.5, row + 0.5)``;
* the y axis points down, so ``theta = atan2(dy, dx)`` increases clockwise
  on screen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

Canvas = np.ndarray  # (H, W, 3) float64, linear RGB in [0, 1]

# Gaussian stamps are cut off where the exponent falls below -8, i.e. at the
# 4-sigma ellipse (alpha < 3.4e-4 discarded). Display/replay path only; the
# differentiable renderer uses a wider support.
GAUSSIAN_SUPPORT_SIGMAS = 4.0

# Stamp opacity follows pressure^OPACITY_EXPONENT for tip-based modes.
OPACITY_EXPONENT = 2.5


class BrushKind(Enum):
    HARD_ROUND = "hard_round"
    BRUSH_TIP = "brush_tip"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class BrushMode:
    """Active brush variant. ``texture_id`` is required for BRUSH_TIP only."""

    kind: BrushKind
    texture_id: str | None = None

    def __post_init__(self):
        if self.kind is BrushKind.BRUSH_TIP and not self.texture_id:
            raise ValueError("BRUSH_TIP mode requires a texture_id")
        if self.kind is not BrushKind.BRUSH_TIP and self.texture_id is not None:
            raise ValueError(f"{self.kind.value} mode does not take a texture_id")

    @property
    def is_tip(self) -> bool:
        return self.kind in (BrushKind.HARD_ROUND, BrushKind.BRUSH_TIP)


HARD_ROUND = BrushMode(BrushKind.HARD_ROUND)
GAUSSIAN = BrushMode(BrushKind.GAUSSIAN)


def brush_tip(texture_id: str) -> BrushMode:
    return BrushMode(BrushKind.BRUSH_TIP, texture_id)


@dataclass(frozen=True)
class Stamp:
    """One brush placement.

    Tip-mode stamps carry ``(r, p)`` and no ``(sigma_x, sigma_y)``; Gaussian
    stamps carry ``(sigma_x, sigma_y)`` and no ``p``. Color channels are
    linear RGB in [0, 1], theta is radians in [-pi, pi].
    """

    mode: BrushMode
    x: float
    y: float
    theta: float = 0.0
    color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    r: float | None = None
    p: float | None = None
    sigma_x: float | None = None
    sigma_y: float | None = None

    def __post_init__(self):
        if self.mode.is_tip:
            if self.r is None or self.p is None:
                raise ValueError("tip-mode stamps require r and p")
            if self.sigma_x is not None or self.sigma_y is not None:
                raise ValueError("tip-mode stamps do not take sigma_x/sigma_y")
            if not (self.r > 0):
                raise ValueError(f"stamp radius must be positive, got {self.r}")
            if not (0.0 <= self.p <= 1.0):
                raise ValueError(f"pressure must be in [0, 1], got {self.p}")
        else:
            if self.sigma_x is None or self.sigma_y is None:
                raise ValueError("Gaussian stamps require sigma_x and sigma_y")
            if self.r is not None or self.p is not None:
                raise ValueError("Gaussian stamps do not take r/p")
            if not (self.sigma_x > 0 and self.sigma_y > 0):
                raise ValueError("sigma_x and sigma_y must be positive")
        for c in self.color:
            if not (0.0 <= c <= 1.0):
                raise ValueError(f"color channels must be in [0, 1], got {self.color}")

    def extent(self) -> float:
        """Support radius in pixels (tip: r; Gaussian: the 4-sigma cutoff)."""
        if self.mode.is_tip:
            return float(self.r)
        return GAUSSIAN_SUPPORT_SIGMAS * float(max(self.sigma_x, self.sigma_y))


@dataclass
class AlphaMap:
    """Dense alpha grid placed at integer pixel offset ``(x0, y0)`` on the canvas."""

    x0: int
    y0: int
    values: np.ndarray  # (h, w) float64 in [0, 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PressureConfig:
    """Pressure-to-radius curve bounds plus the fixed smoothing coefficients."""

    r_min: float
    r_max: float
    smooth_prev: float = 0.7
    smooth_raw: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.r_min <= self.r_max):
            raise ValueError(f"require 0 < r_min <= r_max, got ({self.r_min}, {self.r_max})")
        if abs(self.smooth_prev + self.smooth_raw - 1.0) > 1e-12:
            raise ValueError("smoothing coefficients must sum to 1")

    @classmethod
    def for_base_size(cls, base_size: float, min_fraction: float = 0.15) -> "PressureConfig":
        """Curve for a brush-size setting: full pressure reaches ``base_size``,
        zero pressure bottoms out at ``min_fraction`` of it (at least 0.5 px)."""
        if not base_size > 0:
            raise ValueError(f"base_size must be positive, got {base_size}")
        r_min = max(0.5, min_fraction * base_size)
        return cls(r_min=min(r_min, base_size), r_max=base_size)


def _check_pressure(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("pressure must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"pressure must be in [0, 1], got {p}")
    return arr


def radius_from_pressure(p, cfg: PressureConfig):
    """Logarithmic pressure-to-radius curve: r_min + (r_max - r_min) * log(1+9p)/log 10.

    Accepts scalars or arrays; monotone nondecreasing, range [r_min, r_max].
    """
    arr = _check_pressure(p)
    r = cfg.r_min + (cfg.r_max - cfg.r_min) * np.log1p(9.0 * arr) / math.log(10.0)
    return float(r) if np.isscalar(p) or arr.ndim == 0 else r


def opacity_from_pressure(p):
    """Opacity scale p**2.5; models nonlinear buildup of physical media."""
    arr = _check_pressure(p)
    out = arr ** OPACITY_EXPONENT
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def smooth_pressure(prev_smoothed: float, raw: float,
                    coeffs: tuple[float, float] = (0.7, 0.3)) -> float:
    """One step of the exponential pressure smoother (0.7 previous, 0.3 current)."""
    _check_pressure(prev_smoothed)
    _check_pressure(raw)
    return coeffs[0] * prev_smoothed + coeffs[1] * raw


def _grid(x0: int, y0: int, w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    # pixel centers at integer + 0.5
    xs = x0 + 0.5 + np.arange(w, dtype=np.float64)
    ys = y0 + 0.5 + np.arange(h, dtype=np.float64)
    return np.meshgrid(xs, ys)


def _support_bbox(cx: float, cy: float, half_x: float, half_y: float) -> tuple[int, int, int, int]:
    x0 = math.floor(cx - half_x - 1.0)
    y0 = math.floor(cy - half_y - 1.0)
    x1 = math.ceil(cx + half_x + 1.0)
    y1 = math.ceil(cy + half_y + 1.0)
    return x0, y0, max(x1 - x0, 1), max(y1 - y0, 1)


def disk_profile(d, r: float, soften: float):
    """Radial profile of the hard-round tip.

    ``soften == 0`` gives the binary disk (1 inside radius r, 0 outside).
    ``soften > 0`` replaces the rim with a smoothstep falloff of that width,
    reaching 0 exactly at r, so the support never grows.
    """
    d = np.asarray(d, dtype=np.float64)
    if soften <= 0.0:
        return (d <= r).astype(np.float64)
    t = np.clip((r - d) / soften, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def stamp_alpha_hard_round(stamp: Stamp, soften: float = 0.0) -> AlphaMap:
    """Alpha map of a hard-round stamp, scaled by pressure opacity."""
    if stamp.mode.kind is not BrushKind.HARD_ROUND:
        raise ValueError("stamp is not in HARD_ROUND mode")
    if soften < 0:
        raise ValueError("soften must be >= 0")
    r = float(stamp.r)
    x0, y0, w, h = _support_bbox(stamp.x, stamp.y, r, r)
    xs, ys = _grid(x0, y0, w, h)
    d = np.hypot(xs - stamp.x, ys - stamp.y)
    values = disk_profile(d, r, soften) * opacity_from_pressure(stamp.p)
    return AlphaMap(x0, y0, values)


def bilinear_sample(texture: np.ndarray, qx: np.ndarray, qy: np.ndarray) -> np.ndarray:
    """Sample a (th, tw) grayscale raster at continuous texel coordinates.

    Texel (i, j) has its center at (j + 0.5, i + 0.5); samples outside the
    texture rectangle return 0.
    """
    th, tw = texture.shape
    fx = qx - 0.5
    fy = qy - 0.5
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    tx = fx - ix
    ty = fy - iy

    def tex(iyy, ixx):
        valid = (ixx >= 0) & (ixx < tw) & (iyy >= 0) & (iyy < th)
        out = np.zeros(ixx.shape, dtype=np.float64)
        out[valid] = texture[iyy[valid], ixx[valid]]
        return out

    v00 = tex(iy, ix)
    v01 = tex(iy, ix + 1)
    v10 = tex(iy + 1, ix)
    v11 = tex(iy + 1, ix + 1)
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return top * (1.0 - ty) + bot * ty


def texture_warp_coords(stamp: Stamp, xs: np.ndarray, ys: np.ndarray,
                        tex_shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Map canvas points into texel coordinates for a tip-texture stamp.

    Inverse of translate(x, y) . rotate(theta) . scale(2r / max(tw, th)):
    the texture's larger extent maps to the stamp diameter.
    """
    th, tw = tex_shape
    scale = 2.0 * float(stamp.r) / float(max(tw, th))
    c, s = math.cos(stamp.theta), math.sin(stamp.theta)
    dx = xs - stamp.x
    dy = ys - stamp.y
    ur = (c * dx + s * dy) / scale
    vr = (-s * dx + c * dy) / scale
    return ur + tw / 2.0, vr + th / 2.0


def stamp_alpha_textured(texture: np.ndarray, stamp: Stamp) -> AlphaMap:
    """Alpha map of a textured tip stamp: warped texture times pressure opacity."""
    if stamp.mode.kind is not BrushKind.BRUSH_TIP:
        raise ValueError("stamp is not in BRUSH_TIP mode")
    if texture is None:
        raise ValueError(f"missing texture for id {stamp.mode.texture_id!r}")
    texture = np.asarray(texture, dtype=np.float64)
    if texture.ndim != 2:
        raise ValueError("texture must be a 2D grayscale raster")
    if texture.size and (texture.min() < 0.0 or texture.max() > 1.0):
        raise ValueError("texture values must be in [0, 1]")
    th, tw = texture.shape
    half = float(stamp.r) * math.hypot(tw, th) / max(tw, th)
    x0, y0, w, h = _support_bbox(stamp.x, stamp.y, half, half)
    xs, ys = _grid(x0, y0, w, h)
    qx, qy = texture_warp_coords(stamp, xs, ys, (th, tw))
    values = bilinear_sample(texture, qx, qy) * opacity_from_pressure(stamp.p)
    return AlphaMap(x0, y0, values)


def gaussian_offsets(stamp: Stamp, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pixel offsets from the stamp center, rotated into the sigma_x/sigma_y frame."""
    c, s = math.cos(stamp.theta), math.sin(stamp.theta)
    dx = xs - stamp.x
    dy = ys - stamp.y
    return c * dx + s * dy, -s * dx + c * dy


def stamp_alpha_gaussian(stamp: Stamp, support_sigmas: float = GAUSSIAN_SUPPORT_SIGMAS) -> AlphaMap:
    """Alpha map of an anisotropic Gaussian stamp, truncated at the support ellipse."""
    if stamp.mode.kind is not BrushKind.GAUSSIAN:
        raise ValueError("stamp is not in GAUSSIAN mode")
    sx, sy = float(stamp.sigma_x), float(stamp.sigma_y)
    c, s = math.cos(stamp.theta), math.sin(stamp.theta)
    half_x = support_sigmas * math.sqrt((sx * c) ** 2 + (sy * s) ** 2)
    half_y = support_sigmas * math.sqrt((sx * s) ** 2 + (sy * c) ** 2)
    x0, y0, w, h = _support_bbox(stamp.x, stamp.y, half_x, half_y)
    xs, ys = _grid(x0, y0, w, h)
    ur, vr = gaussian_offsets(stamp, xs, ys)
    q = (ur / sx) ** 2 + (vr / sy) ** 2
    values = np.where(q <= support_sigmas ** 2, np.exp(-0.5 * q), 0.0)
    return AlphaMap(x0, y0, values)


def stamp_alpha(stamp: Stamp, textures: Mapping[str, np.ndarray] | None = None,
                soften: float = 0.0) -> AlphaMap:
    """Dispatch alpha synthesis by brush mode."""
    kind = stamp.mode.kind
    if kind is BrushKind.HARD_ROUND:
        return stamp_alpha_hard_round(stamp, soften=soften)
    if kind is BrushKind.BRUSH_TIP:
        tex = None if textures is None else textures.get(stamp.mode.texture_id)
        if tex is None:
            raise ValueError(f"missing texture for id {stamp.mode.texture_id!r}")
        return stamp_alpha_textured(tex, stamp)
    return stamp_alpha_gaussian(stamp)


def _clip_to_canvas(alpha: AlphaMap, shape: tuple[int, ...]):
    """Intersection of the alpha map with the canvas; None if disjoint."""
    H, W = shape[0], shape[1]
    h, w = alpha.values.shape
    cx0 = max(alpha.x0, 0)
    cy0 = max(alpha.y0, 0)
    cx1 = min(alpha.x0 + w, W)
    cy1 = min(alpha.y0 + h, H)
    if cx0 >= cx1 or cy0 >= cy1:
        return None
    sub = alpha.values[cy0 - alpha.y0:cy1 - alpha.y0, cx0 - alpha.x0:cx1 - alpha.x0]
    return (slice(cy0, cy1), slice(cx0, cx1)), sub


def composite_over(canvas: Canvas, alpha: AlphaMap, color: Sequence[float]) -> Canvas:
    """Alpha-over blend of one stamp: h' = a*c + (1-a)*h, in place.

    Regions of the alpha map outside the canvas are clipped. Pixels with
    a == 0 are left bit-exact (the arithmetic is exact there in IEEE 754).
    """
    color = np.asarray(color, dtype=np.float64)
    if color.shape != (3,) or color.min() < 0.0 or color.max() > 1.0:
        raise ValueError(f"color must be RGB in [0, 1], got {color}")
    clipped = _clip_to_canvas(alpha, canvas.shape)
    if clipped is None:
        return canvas
    window, a = clipped
    a3 = a[:, :, None]
    canvas[window] = a3 * color + (1.0 - a3) * canvas[window]
    return canvas


def composite_weighted_sum(stamps: Iterable[tuple[AlphaMap, Sequence[float]]],
                           background: Canvas,
                           background_weight: float | None = None) -> Canvas:
    """Order-independent normalized blend used during optimization.

    Per pixel: (sum_i a_i c_i + w_bg * bg) / (sum_i a_i + w_bg). Unlike the
    painter's algorithm, every stamp contributes to every covered pixel, so
    occluded stamps keep nonzero gradients. Returns a new canvas.

    By default the background weight adapts to coverage,
    w_bg = max(0, 1 - sum_i a_i), which makes the blend agree exactly with
    alpha-over compositing wherever total coverage stays at or below 1 (in
    particular for any single stamp) and reduces to a pure normalized stamp
    average where coverage exceeds 1. Passing a float uses that constant
    weight instead.
    """
    bg = background.astype(np.float64, copy=False)
    cover = np.zeros(background.shape[:2], dtype=np.float64)
    acc = np.zeros_like(bg)
    for alpha, color in stamps:
        clipped = _clip_to_canvas(alpha, background.shape)
        if clipped is None:
            continue
        window, a = clipped
        color = np.asarray(color, dtype=np.float64)
        acc[window] += a[:, :, None] * color
        cover[window] += a
    if background_weight is None:
        w_bg = np.maximum(0.0, 1.0 - cover)
    else:
        w_bg = np.full_like(cover, background_weight)
    den = cover + w_bg
    safe = np.where(den > 0.0, den, 1.0)[:, :, None]
    return np.where((den > 0.0)[:, :, None],
                    (acc + w_bg[:, :, None] * bg) / safe, bg)


def render_stamps(canvas: Canvas, stamps: Iterable[Stamp],
                  textures: Mapping[str, np.ndarray] | None = None,
                  soften: float = 0.0) -> Canvas:
    """Painter's-algorithm composite of a stamp sequence, in order, in place."""
    for stamp in stamps:
        composite_over(canvas, stamp_alpha(stamp, textures=textures, soften=soften), stamp.color)
    return canvas


def blank_canvas(height: int, width: int, color: Sequence[float] = (1.0, 1.0, 1.0)) -> Canvas:
    """Fresh canvas filled with a background color (linear RGB)."""
    canvas = np.empty((height, width, 3), dtype=np.float64)
    canvas[:] = np.asarray(color, dtype=np.float64)
    return canvas


def stamps_bbox(stamps: Iterable[Stamp], pad: float = 0.0) -> tuple[int, int, int, int] | None:
    """Integer (x0, y0, w, h) covering all stamp supports, or None when empty."""
    x0 = y0 = math.inf
    x1 = y1 = -math.inf
    for stamp in stamps:
        e = stamp.extent() + pad
        x0 = min(x0, stamp.x - e)
        y0 = min(y0, stamp.y - e)
        x1 = max(x1, stamp.x + e)
        y1 = max(y1, stamp.y + e)
    if not math.isfinite(x0):
        return None
    ix0, iy0 = math.floor(x0), math.floor(y0)
    return ix0, iy0, math.ceil(x1) - ix0, math.ceil(y1) - iy0
