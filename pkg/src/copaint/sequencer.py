"""Coarse-to-fine stroke-plan generation from guidance rasters.

The planner turns a target image plus three precomputed rasters (semantic
labels, surface normals, attention weights) into an ordered stamp sequence:
regions are visited coarsest label first; within a region, positions are drawn
from the attention distribution, scored by ``100 * sigma_hat + a_hat``
(normal variance dominates, attention breaks ties) and emitted flat/less
salient first, with brush sizes decaying linearly from a region-specific
maximum down to the minimum.

``generate_dataset_entry`` additionally runs the joint differentiable
optimization over the assembled plan and replays the optimized strokes
sequentially, recording the canvas after every stroke.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .brush import (
    GAUSSIAN,
    BrushKind,
    BrushMode,
    Canvas,
    Stamp,
    blank_canvas,
    composite_over,
    stamp_alpha,
)
from .diffrender import LossTrace, OptimConfig, layout_for_stamps, optimize_strokes
from .formats import StrokePlan

VARIANCE_WINDOW = 8


@dataclass
class LabelMap:
    """Integer label raster plus the label order table (coarsest first)."""

    raster: np.ndarray                      # (H, W) int
    order: list[int]                        # active label ids, coarsest first
    ignored: frozenset = frozenset()
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        allowed = set(self.order) | set(self.ignored)
        present = set(int(v) for v in np.unique(self.raster))
        stray = sorted(present - allowed)
        if stray:
            raise ValueError(f"labels {stray} not in the order table or ignored")

    def mask(self, label_id: int) -> np.ndarray:
        return self.raster == label_id


@dataclass
class NormalMap:
    """Per-pixel unit surface normals, (H, W, 3)."""

    vectors: np.ndarray

    def __post_init__(self):
        norms = np.linalg.norm(self.vectors, axis=2)
        if np.any(np.abs(norms - 1.0) > 1e-3):
            raise ValueError("normals must be unit length (within 1e-3)")


@dataclass
class AttentionMap:
    """Nonnegative spatial sampling weights, (H, W)."""

    weights: np.ndarray

    def __post_init__(self):
        if np.any(self.weights < 0):
            raise ValueError("attention weights must be nonnegative")


@dataclass
class RegionPlan:
    """Planning record for one region: sampled positions (emission order),
    their scores, assigned brush sizes, and the stroke budget."""

    label_id: int
    positions: list[tuple[int, int]]        # (row, col), emission order
    scores: list[float]
    sizes: list[float]
    budget: int


@dataclass
class SequencerConfig:
    total_budget: int = 350
    brush: BrushMode = GAUSSIAN
    min_per_region: int = 1
    r_min_px: float = 2.0
    r_max_bbox_frac: float = 0.25          # region max radius = frac * bbox diagonal
    init_pressure: float = 0.8
    label_weights: dict = field(default_factory=dict)   # label id -> area multiplier
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)
    optim: OptimConfig = field(default_factory=OptimConfig)
    # Optimization granularity: "batched" refines runs of optimize_batch
    # strokes in emission order, each against the composite of everything
    # before it; "region" does the same per label region; "joint" optimizes
    # all strokes simultaneously. Joint optimization of hundreds of heavily
    # overlapping stamps makes the normalized blend underdetermined and
    # degrades the sequential replay, so batched is the default.
    optimize_granularity: str = "batched"
    optimize_batch: int = 40


def _clamped_box_sums(arr: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel sums and counts over the window rows/cols [i-w/2, i+w/2),
    clamped at the borders."""
    H, W = arr.shape
    lo = window // 2
    hi = window - lo
    cs = np.zeros((H + 1, W + 1), dtype=np.float64)
    cs[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    r0 = np.clip(np.arange(H) - lo, 0, H)
    r1 = np.clip(np.arange(H) + hi, 0, H)
    c0 = np.clip(np.arange(W) - lo, 0, W)
    c1 = np.clip(np.arange(W) + hi, 0, W)
    sums = (cs[r1[:, None], c1[None, :]] - cs[r0[:, None], c1[None, :]]
            - cs[r1[:, None], c0[None, :]] + cs[r0[:, None], c0[None, :]])
    counts = (r1 - r0)[:, None] * (c1 - c0)[None, :]
    return sums, counts.astype(np.float64)


def normal_variance_map(normals: NormalMap, window: int = VARIANCE_WINDOW) -> np.ndarray:
    """Local normal variance at every pixel: mean over the three components of
    the per-component variance across the window (clamped at borders)."""
    vecs = normals.vectors
    out = np.zeros(vecs.shape[:2], dtype=np.float64)
    for ch in range(3):
        comp = vecs[:, :, ch]
        s, n = _clamped_box_sums(comp, window)
        s2, _ = _clamped_box_sums(comp * comp, window)
        mean = s / n
        out += np.maximum(s2 / n - mean * mean, 0.0)
    return out / 3.0


def local_normal_variance(normals: NormalMap, pos: tuple[int, int],
                          window: int = VARIANCE_WINDOW) -> float:
    """Variance of the normal field over the window centered at pos=(row, col)."""
    H, W = normals.vectors.shape[:2]
    row, col = pos
    if not (0 <= row < H and 0 <= col < W):
        raise ValueError(f"position {pos} outside the raster")
    lo = window // 2
    hi = window - lo
    patch = normals.vectors[max(0, row - lo):min(H, row + hi),
                            max(0, col - lo):min(W, col + hi)]
    return float(np.mean(np.var(patch.reshape(-1, 3), axis=0)))


def sample_positions(attn: AttentionMap, mask: np.ndarray, n: int,
                     seed: int | np.random.Generator,
                     min_separation: float = 1.0,
                     max_retries: int = 50) -> list[tuple[int, int]]:
    """Draw n positions from the attention distribution restricted to mask.

    Draws are with replacement; a draw within ``min_separation`` pixels of an
    earlier one is re-drawn up to ``max_retries`` times (then kept, so dense
    masks cannot loop forever). Zero total attention inside the mask falls
    back to uniform sampling over the mask. Deterministic given the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != attn.weights.shape:
        raise ValueError("mask and attention dimensions do not match")
    if not mask.any():
        raise ValueError("mask is empty")
    weights = np.where(mask, attn.weights, 0.0).ravel()
    total = weights.sum()
    if total <= 0.0:
        weights = mask.astype(np.float64).ravel()
        total = weights.sum()
    cumulative = np.cumsum(weights)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    W = mask.shape[1]
    chosen: list[tuple[int, int]] = []
    for _ in range(n):
        pos = None
        for _attempt in range(max_retries):
            flat = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
            flat = min(flat, weights.size - 1)
            cand = (flat // W, flat % W)
            if all((cand[0] - p[0]) ** 2 + (cand[1] - p[1]) ** 2 > min_separation ** 2
                   for p in chosen):
                pos = cand
                break
            pos = cand
        chosen.append(pos)
    return chosen


def score_order_indices(sigma_hat: np.ndarray, a_hat: np.ndarray) -> np.ndarray:
    """Ascending stable ordering of score = 100 * sigma_hat + a_hat."""
    sigma_hat = np.asarray(sigma_hat, dtype=np.float64)
    a_hat = np.asarray(a_hat, dtype=np.float64)
    if sigma_hat.shape != a_hat.shape:
        raise ValueError("sigma_hat and a_hat lengths differ")
    scores = 100.0 * sigma_hat + a_hat
    return np.argsort(scores, kind="stable")


def score_and_order(positions, sigma_hat, a_hat):
    """Positions sorted flat/less-salient first (ties keep sample order)."""
    order = score_order_indices(sigma_hat, a_hat)
    return [positions[i] for i in order]


def assign_brush_sizes(n: int, r_max: float, r_min: float) -> np.ndarray:
    """Linear size decay over emission order; n=1 yields just r_max."""
    if not (r_max >= r_min > 0):
        raise ValueError(f"require r_max >= r_min > 0, got ({r_max}, {r_min})")
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return np.array([r_max])
    k = np.arange(n, dtype=np.float64)
    return r_max - (r_max - r_min) * k / (n - 1)


def _allocate_budget(areas: list[float], budget: int, min_per_region: int) -> list[int]:
    """Largest-remainder proportional allocation, then enforce the minimum by
    pulling from the largest allocations."""
    total = sum(areas)
    raw = [budget * a / total for a in areas]
    counts = [int(math.floor(v)) for v in raw]
    remainder = budget - sum(counts)
    by_frac = sorted(range(len(areas)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_frac[:remainder]:
        counts[i] += 1
    if budget >= min_per_region * len(areas):
        for i in range(len(counts)):
            while counts[i] < min_per_region:
                donor = max(range(len(counts)), key=lambda j: counts[j])
                counts[donor] -= 1
                counts[i] += 1
    return counts


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def build_stroke_plan(target: Canvas, labels: LabelMap, normals: NormalMap,
                      attn: AttentionMap, cfg: SequencerConfig | None = None,
                      seed: int = 0) -> StrokePlan:
    """Assemble the full coarse-to-fine plan for a target image.

    The stroke budget is split across regions proportionally to pixel area
    (at least one per nonempty region); initial stamp colors are read from the
    target at each position, theta starts at 0 and pressure at 0.8.
    """
    cfg = cfg or SequencerConfig()
    H, W = target.shape[:2]
    for name, shape in (("labels", labels.raster.shape),
                        ("normals", normals.vectors.shape[:2]),
                        ("attention", attn.weights.shape)):
        if shape != (H, W):
            raise ValueError(f"{name} dimensions {shape} do not match target {(H, W)}")
    if not labels.order:
        raise ValueError("label order table is empty")

    regions = []
    for label_id in labels.order:
        mask = labels.mask(label_id)
        area = int(mask.sum())
        if area > 0:
            regions.append((label_id, mask, area * cfg.label_weights.get(label_id, 1.0)))
    if not regions:
        raise ValueError("no nonempty regions to paint")

    budgets = _allocate_budget([r[2] for r in regions], cfg.total_budget, cfg.min_per_region)
    variance = normal_variance_map(normals)
    rng = np.random.default_rng(seed)

    stamps: list[Stamp] = []
    region_plans: list[RegionPlan] = []
    for (label_id, mask, _), n in zip(regions, budgets):
        if n < 1:
            continue
        positions = sample_positions(attn, mask, n, rng)
        v_region = variance[mask]
        a_region = attn.weights[mask]
        v_lo, v_hi = float(v_region.min()), float(v_region.max())
        a_lo, a_hi = float(a_region.min()), float(a_region.max())
        rows = np.array([p[0] for p in positions])
        cols = np.array([p[1] for p in positions])
        sigma_hat = (np.zeros(n) if v_hi - v_lo < 1e-12
                     else (variance[rows, cols] - v_lo) / (v_hi - v_lo))
        a_hat = (np.zeros(n) if a_hi - a_lo < 1e-12
                 else (attn.weights[rows, cols] - a_lo) / (a_hi - a_lo))
        order = score_order_indices(sigma_hat, a_hat)
        ordered = [positions[i] for i in order]
        scores = (100.0 * sigma_hat + a_hat)[order]

        rr, cc = np.nonzero(mask)
        bbox_diag = math.hypot(rr.max() - rr.min() + 1, cc.max() - cc.min() + 1)
        r_max = max(cfg.r_min_px, cfg.r_max_bbox_frac * bbox_diag)
        sizes = assign_brush_sizes(n, r_max, min(cfg.r_min_px, r_max))

        for (row, col), size in zip(ordered, sizes):
            color = tuple(np.clip(target[row, col], 0.0, 1.0))
            x, y = col + 0.5, row + 0.5
            if cfg.brush.kind is BrushKind.GAUSSIAN:
                sigma = max(size / 2.0, 1e-3)
                stamps.append(Stamp(mode=cfg.brush, x=x, y=y, theta=0.0, color=color,
                                    sigma_x=sigma, sigma_y=sigma))
            else:
                stamps.append(Stamp(mode=cfg.brush, x=x, y=y, theta=0.0, color=color,
                                    r=size, p=cfg.init_pressure))
        region_plans.append(RegionPlan(label_id=label_id,
                                       positions=ordered,
                                       scores=[float(s) for s in scores],
                                       sizes=[float(s) for s in sizes],
                                       budget=n))

    annotations = {
        "seed": seed,
        "budget": cfg.total_budget,
        "regions": [
            {"label": rp.label_id, "budget": rp.budget,
             "name": labels.names.get(rp.label_id, str(rp.label_id))}
            for rp in region_plans
        ],
    }
    plan = StrokePlan(width=W, height=H, mode=cfg.brush, stamps=stamps,
                      annotations=annotations)
    plan.regions = region_plans  # full planning detail, not serialized
    return plan


def _painter_apply(canvas: Canvas, stamps) -> Canvas:
    for stamp in stamps:
        composite_over(canvas, stamp_alpha(stamp), stamp.color)
    return canvas


def _painter_mse(stamps, background: Canvas, target: Canvas) -> float:
    rendered = _painter_apply(background.copy(), stamps)
    d = rendered - target
    return float(np.sum(d * d) / (target.shape[0] * target.shape[1]))


def _stamp_groups(plan: StrokePlan, cfg: SequencerConfig):
    if cfg.optimize_granularity == "joint":
        return [list(plan.stamps)]
    groups = []
    cursor = 0
    for rp in plan.regions:
        region = list(plan.stamps[cursor:cursor + rp.budget])
        cursor += rp.budget
        if cfg.optimize_granularity == "region":
            groups.append(region)
        else:
            step = max(1, cfg.optimize_batch)
            groups.extend(region[i:i + step] for i in range(0, len(region), step))
    return groups


def generate_dataset_entry(target: Canvas, labels: LabelMap, normals: NormalMap,
                           attn: AttentionMap, cfg: SequencerConfig | None = None,
                           seed: int = 0):
    """Plan, optimize, then replay stroke by stroke.

    Optimization proceeds over stamp groups in emission order (see
    ``SequencerConfig.optimize_granularity``); each group is refined against
    the target with the painter composite of everything before it as the
    background. A group's refinement is kept only if it lowers the sequential
    render's error, and the whole optimized plan is kept only if it beats the
    initial plan, so the returned plan never renders worse than the input.

    Returns ``(optimized_plan, snapshots, trace)`` where snapshots[i] is the
    canvas after compositing stroke i with the painter's algorithm; the last
    snapshot therefore equals the display render of the whole optimized plan.
    The trace concatenates the per-group optimizer losses.
    """
    cfg = cfg or SequencerConfig()
    plan = build_stroke_plan(target, labels, normals, attn, cfg, seed)
    H, W = target.shape[:2]
    background = blank_canvas(H, W, cfg.background)

    canvas = background.copy()
    optimized_stamps: list[Stamp] = []
    losses: list[float] = []
    stop_reason = "max_iters"
    for group in _stamp_groups(plan, cfg):
        layout = layout_for_stamps(group, W, H)
        best, trace = optimize_strokes(layout.pack(group), layout, target,
                                       cfg.optim, background=canvas.copy())
        refined = layout.unpack(best)
        if _painter_mse(refined, canvas, target) > _painter_mse(group, canvas, target):
            refined = group
        optimized_stamps.extend(refined)
        canvas = _painter_apply(canvas, refined)
        losses.extend(trace.losses)
        stop_reason = trace.stop_reason

    if _painter_mse(optimized_stamps, background, target) > _painter_mse(
            plan.stamps, background, target):
        optimized_stamps = list(plan.stamps)

    trace = LossTrace(losses=losses, stop_reason=stop_reason)
    optimized = replace(plan, stamps=optimized_stamps)
    optimized.regions = plan.regions
    optimized.annotations = dict(plan.annotations)
    optimized.annotations["loss_trace"] = [float(v) for v in losses]
    optimized.annotations["stop_reason"] = stop_reason

    canvas = background.copy()
    snapshots = []
    for stamp in optimized.stamps:
        composite_over(canvas, stamp_alpha(stamp), stamp.color)
        snapshots.append(canvas.copy())
    return optimized, snapshots, trace
