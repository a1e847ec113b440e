"""Interactive painting session: canvas, history, undo/redo, and the four
AI-assisted workflows (history optimization, stroke completion, region
inpainting, background stroke refinement).

Concurrency model: one writer per session. Every mutation of canvas or
history happens under the session lock; refine jobs run on a small worker
pool against immutable input copies and hand their results to an ordered
commit queue, so externally observable history order always equals commit
order and no torn state is visible between the stamps of one commit.

Every mutating workflow guards its commit: a candidate canvas is accepted
only if it does not increase the relevant MSE against the current intent
(whole canvas for completion and history optimization, masked for
inpainting). Optimization runs on the weighted-sum blend while display uses
the painter's algorithm, so without the gate a rare commit could regress;
with it, canvas-vs-reference error is nonincreasing at every commit.

The history replay invariant holds at all times: compositing the stored
history onto a blank canvas reproduces the live canvas bit-exactly.
"""

from __future__ import annotations

import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .brush import (
    GAUSSIAN,
    BrushKind,
    BrushMode,
    Canvas,
    PressureConfig,
    Stamp,
    blank_canvas,
    composite_over,
    stamp_alpha,
    stamps_bbox,
)
from .diffrender import OptimConfig, layout_for_stamps, optimize_strokes
from .formats import DocEntry, SessionDocument, texture_hash
from .metrics import luminance
from .predictors import (
    IntentProvider,
    ProposerConfig,
    propose_next_stroke,
    stroke_space_for,
)
from .sequencer import AttentionMap, LabelMap, NormalMap, SequencerConfig, build_stroke_plan
from .strokes import StrokeRecord, plan_stamps

COMPLETE = "complete"


@dataclass
class SessionConfig:
    width: int = 256
    height: int = 256
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)
    undo_ring: int = 64
    snapshot_pixel_limit: int = 1 << 18   # larger canvases fall back to history replay
    ai_brush: BrushMode = GAUSSIAN
    optim: OptimConfig = field(default_factory=OptimConfig)
    proposer: ProposerConfig = field(default_factory=ProposerConfig)
    inpaint_budget: int = 60
    progress_horizon: int = 300           # history length at which sizing reaches fine
    stroke_min_fraction: float = 0.15     # pressure-curve floor relative to base size
    refine_workers: int = 2


@dataclass
class HistoryEntry:
    """One committed unit: a user stroke or an AI stamp group."""

    entry_id: int
    kind: str                              # "stroke" | "completion" | "inpaint"
    stamps: tuple[Stamp, ...]
    record: StrokeRecord | None = None
    modified: bool = False                 # stamps rewritten after the original commit
    clip_mask: np.ndarray | None = None    # selection clip: alpha zeroed outside


@dataclass
class RefineJob:
    """Background refinement of one committed stroke against the intent crop."""

    job_id: int
    stroke_id: int
    rect: tuple[int, int, int, int]        # x0, y0, w, h crop on the canvas
    status: str = "pending"                # pending | done | superseded
    result: tuple[Stamp, ...] | None = None


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight (x0, y0, w, h) around the true pixels of a mask."""
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise ValueError("mask is empty")
    return (int(cols.min()), int(rows.min()),
            int(cols.max() - cols.min() + 1), int(rows.max() - rows.min() + 1))


def to_local(x: float, y: float, bbox: tuple[int, int, int, int]) -> tuple[float, float]:
    """Canvas coordinates -> region-local unit square coordinates."""
    x0, y0, w, h = bbox
    return (x - x0) / w, (y - y0) / h


def to_global(u: float, v: float, bbox: tuple[int, int, int, int]) -> tuple[float, float]:
    """Region-local unit square coordinates -> canvas coordinates."""
    x0, y0, w, h = bbox
    return x0 + u * w, y0 + v * h


def _clip_alpha_to_mask(alpha, mask: np.ndarray) -> None:
    """Zero the parts of an alpha map that fall outside a selection mask."""
    H, W = mask.shape
    h, w = alpha.values.shape
    x0, y0 = max(alpha.x0, 0), max(alpha.y0, 0)
    x1, y1 = min(alpha.x0 + w, W), min(alpha.y0 + h, H)
    keep = np.zeros((h, w), dtype=bool)
    if x0 < x1 and y0 < y1:
        keep[y0 - alpha.y0:y1 - alpha.y0, x0 - alpha.x0:x1 - alpha.x0] = \
            mask[y0:y1, x0:x1]
    alpha.values *= keep


def _canvas_mse(a: Canvas, b: Canvas, mask: np.ndarray | None = None) -> float:
    d = a - b
    sq = np.sum(d * d, axis=2)
    if mask is not None:
        sq = sq[mask]
    return float(np.mean(sq)) if sq.size else 0.0


class Session:
    """Live painting session. All public methods are thread-safe."""

    def __init__(self, config: SessionConfig | None = None,
                 intent: IntentProvider | None = None, seed: int = 0):
        self.config = config or SessionConfig()
        self.intent = intent
        self.seed = seed
        self.canvas: Canvas = blank_canvas(self.config.height, self.config.width,
                                           self.config.background)
        self.history: list[HistoryEntry] = []
        self.lasso: np.ndarray | None = None
        self.textures: dict[str, np.ndarray] = {}
        self._lock = threading.RLock()
        self._undo: list[tuple[tuple[HistoryEntry, ...], Canvas | None]] = []
        self._redo: list[tuple[tuple[HistoryEntry, ...], Canvas | None]] = []
        self._next_entry_id = 1
        self._next_job_id = 1
        self.jobs: dict[int, RefineJob] = {}
        self._job_queue: list[int] = []
        self._job_ready: dict[int, tuple[Stamp, ...]] = {}
        self._executor: ThreadPoolExecutor | None = None
        self._listeners: list = []
        self.refine_delays: dict[int, float] = {}   # test seam: per-job sleep seconds

    # -- plumbing ----------------------------------------------------------

    def add_listener(self, callback) -> None:
        """Register a callback receiving event dicts after each commit."""
        with self._lock:
            self._listeners.append(callback)

    def _emit(self, event: dict) -> None:
        for cb in list(self._listeners):
            cb(event)

    def add_texture(self, texture_id: str, texture: np.ndarray) -> None:
        texture = np.asarray(texture, dtype=np.float64)
        if texture.ndim != 2 or texture.min() < 0.0 or texture.max() > 1.0:
            raise ValueError("texture must be a 2D raster in [0, 1]")
        with self._lock:
            self.textures[texture_id] = texture

    def set_intent(self, provider: IntentProvider | None) -> None:
        with self._lock:
            self.intent = provider

    def set_lasso(self, mask: np.ndarray | None) -> None:
        with self._lock:
            if mask is None:
                self.lasso = None
                return
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != self.canvas.shape[:2]:
                raise ValueError("lasso mask dimensions do not match the canvas")
            if not mask.any():
                raise ValueError("lasso mask is empty")
            self.lasso = mask

    def snapshot_canvas(self) -> Canvas:
        with self._lock:
            return self.canvas.copy()

    def replay(self, entries=None) -> Canvas:
        """Composite a history (default: the current one) onto a blank canvas."""
        with self._lock:
            entries = self.history if entries is None else entries
            canvas = blank_canvas(self.config.height, self.config.width,
                                  self.config.background)
            for entry in entries:
                self._composite_entry(canvas, entry)
            return canvas

    def _composite_entry(self, canvas: Canvas, entry: HistoryEntry) -> None:
        self._composite_stamps(canvas, entry.stamps, entry.clip_mask)

    def _composite_stamps(self, canvas: Canvas, stamps, clip_mask=None) -> None:
        for stamp in stamps:
            alpha = stamp_alpha(stamp, textures=self.textures)
            if clip_mask is not None:
                _clip_alpha_to_mask(alpha, clip_mask)
            composite_over(canvas, alpha, stamp.color)

    def _require_intent(self) -> IntentProvider:
        if self.intent is None:
            raise ValueError("no intent provider configured (load a reference first)")
        return self.intent

    def _snapshot(self):
        keep = self.canvas.size // 3 <= self.config.snapshot_pixel_limit
        return (tuple(self.history), self.canvas.copy() if keep else None)

    def _push_undo(self) -> None:
        self._undo.append(self._snapshot())
        if len(self._undo) > self.config.undo_ring:
            del self._undo[0]

    def _restore(self, state) -> None:
        entries, canvas = state
        self.history = list(entries)
        self.canvas = canvas.copy() if canvas is not None else self.replay(self.history)

    def _begin_commit(self) -> None:
        self._push_undo()
        self._redo.clear()

    def _finish_commit(self, op: str, entry_ids: list[int],
                       bbox: tuple[int, int, int, int] | None,
                       supersede: bool = True) -> None:
        if supersede:
            self._supersede_jobs(bbox)
        self._emit({"type": "history", "op": op, "entry_ids": entry_ids,
                    "history_len": len(self.history), "bbox": bbox})

    def _clip_bbox(self, bbox) -> tuple[int, int, int, int] | None:
        if bbox is None:
            return None
        x0, y0, w, h = bbox
        x1, y1 = x0 + w, y0 + h
        x0, y0 = max(x0, 0), max(y0, 0)
        x1 = min(x1, self.config.width)
        y1 = min(y1, self.config.height)
        if x0 >= x1 or y0 >= y1:
            return None
        return x0, y0, x1 - x0, y1 - y0

    # -- user strokes ------------------------------------------------------

    def apply_user_stroke(self, stroke: StrokeRecord) -> int:
        """Render a recorded stroke, append it to history, return its id."""
        if stroke.tool.kind is BrushKind.BRUSH_TIP and stroke.tool.texture_id not in self.textures:
            raise ValueError(f"unknown texture {stroke.tool.texture_id!r}")
        cfg = PressureConfig.for_base_size(stroke.base_size, self.config.stroke_min_fraction)
        stamps = tuple(plan_stamps(stroke, cfg))
        with self._lock:
            self._begin_commit()
            entry = HistoryEntry(entry_id=self._next_entry_id, kind="stroke",
                                 stamps=stamps, record=stroke)
            self._next_entry_id += 1
            self._composite_entry(self.canvas, entry)
            self.history.append(entry)
            bbox = self._clip_bbox(stamps_bbox(stamps))
            self._finish_commit("stroke", [entry.entry_id], bbox)
            return entry.entry_id

    # -- workflow: optimize history -----------------------------------------

    def optimize_history(self) -> list[HistoryEntry]:
        """Jointly re-optimize every committed stamp toward the predicted
        intent, then re-render. Keeps the original parameters if the
        re-rendered canvas would not improve."""
        with self._lock:
            if not self.history:
                raise ValueError("empty history")
            intent = self._require_intent().predict(self.canvas)
            stamps = [s for entry in self.history for s in entry.stamps]
            layout = layout_for_stamps(stamps, self.config.width, self.config.height,
                                       textures=self.textures)
            init = layout.pack(stamps)
            background = blank_canvas(self.config.height, self.config.width,
                                      self.config.background)
            best, _trace = optimize_strokes(init, layout, intent, self.config.optim,
                                            background=background)
            new_stamps = layout.unpack(best)
            entries = []
            cursor = 0
            for entry in self.history:
                n = len(entry.stamps)
                entries.append(replace(entry, stamps=tuple(new_stamps[cursor:cursor + n]),
                                       modified=True))
                cursor += n
            candidate = self.replay(entries)
            if _canvas_mse(candidate, intent) > _canvas_mse(self.canvas, intent):
                return self.history
            self._begin_commit()
            self.history = entries
            self.canvas = candidate
            self._finish_commit("optimize_history", [e.entry_id for e in entries],
                                (0, 0, self.config.width, self.config.height))
            return self.history

    # -- workflow: stroke completion ----------------------------------------

    def _refine_stamp(self, stamp: Stamp, intent: Canvas,
                      freeze_position: bool) -> Stamp:
        """Optimize a single stamp against the intent crop around it."""
        pad = max(stamp.extent() * 2.0, 8.0)
        rect = self._clip_bbox((math.floor(stamp.x - pad), math.floor(stamp.y - pad),
                                math.ceil(2 * pad), math.ceil(2 * pad)))
        if rect is None:
            return stamp
        x0, y0, w, h = rect
        local = replace(stamp, x=stamp.x - x0, y=stamp.y - y0)
        layout = layout_for_stamps([local], w, h, textures=self.textures)
        init = layout.pack([local])
        bounds = layout.default_bounds(self.config.optim)
        if freeze_position:
            lo, hi = bounds
            lo[0] = hi[0] = init[0]
            lo[1] = hi[1] = init[1]
            bounds = (lo, hi)
        window = (slice(y0, y0 + h), slice(x0, x0 + w))
        best, _ = optimize_strokes(init, layout, intent[window], self.config.optim,
                                   background=self.canvas[window].copy(), bounds=bounds)
        refined = layout.unpack(best)[0]
        return replace(refined, x=refined.x + x0, y=refined.y + y0)

    def _try_commit_stamp(self, stamp: Stamp, intent: Canvas,
                          base_mse: float) -> HistoryEntry | None:
        candidate = self.canvas.copy()
        composite_over(candidate, stamp_alpha(stamp, textures=self.textures), stamp.color)
        if _canvas_mse(candidate, intent) > base_mse:
            return None
        self._begin_commit()
        entry = HistoryEntry(entry_id=self._next_entry_id, kind="completion",
                             stamps=(stamp,))
        self._next_entry_id += 1
        self.canvas = candidate
        self.history.append(entry)
        bbox = self._clip_bbox(stamps_bbox(entry.stamps))
        self._finish_commit("completion", [entry.entry_id], bbox)
        return entry

    def stroke_completion_step(self) -> HistoryEntry | str:
        """Propose, refine, and commit the next stroke toward the intent.

        Returns the committed entry, or ``"complete"`` once the canvas matches
        the intent (or no stamp can reduce the error further). Commits are
        gated so canvas-vs-intent MSE never increases; with an active lasso the
        stamp center stays inside the mask (its position is frozen during
        refinement).
        """
        with self._lock:
            intent = self._require_intent().predict(self.canvas)
            progress = min(1.0, len(self.history) / self.config.progress_horizon)
            history_stamps = [s for e in self.history for s in e.stamps]
            vec = propose_next_stroke(self.canvas, intent, history_stamps,
                                      mask=self.lasso, progress=progress,
                                      cfg=self.config.proposer)
            if vec is None:
                return COMPLETE
            space = stroke_space_for(self.canvas, self.config.proposer)
            proposal = space.to_stamp(vec, self.config.ai_brush)
            base_mse = _canvas_mse(self.canvas, intent)

            refined = self._refine_stamp(proposal, intent,
                                         freeze_position=self.lasso is not None)
            for candidate in (refined, proposal, self._minimal_stamp(proposal, intent)):
                entry = self._try_commit_stamp(candidate, intent, base_mse)
                if entry is not None:
                    return entry
            return COMPLETE

    def _minimal_stamp(self, proposal: Stamp, intent: Canvas) -> Stamp:
        """Smallest fallback: a fine stamp at the proposal position with the
        exact intent color there."""
        row = min(max(int(proposal.y), 0), self.config.height - 1)
        col = min(max(int(proposal.x), 0), self.config.width - 1)
        color = tuple(np.clip(intent[row, col], 0.0, 1.0))
        if self.config.ai_brush.kind is BrushKind.GAUSSIAN:
            return Stamp(mode=self.config.ai_brush, x=col + 0.5, y=row + 0.5,
                         color=color, sigma_x=0.75, sigma_y=0.75)
        return Stamp(mode=self.config.ai_brush, x=col + 0.5, y=row + 0.5,
                     color=color, r=1.5, p=1.0)

    # -- workflow: region inpainting ------------------------------------------

    def region_inpaint(self, mask: np.ndarray, label: str = "region",
                       seed: int | None = None) -> HistoryEntry | None:
        """Fill a masked region with a generated, optimized stroke sequence.

        The plan is built over the intent crop in region-local coordinates and
        committed as one undoable unit; stamp centers stay inside the mask.
        Returns None when no candidate improves the masked error.
        """
        with self._lock:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != self.canvas.shape[:2]:
                raise ValueError("mask dimensions do not match the canvas")
            if not mask.any():
                raise ValueError("mask is empty")
            intent = self._require_intent().predict(self.canvas)
            seed = self.seed if seed is None else seed
            bbox = mask_bbox(mask)
            x0, y0, w, h = bbox
            window = (slice(y0, y0 + h), slice(x0, x0 + w))
            mask_crop = mask[window]
            intent_crop = intent[window]
            canvas_crop = self.canvas[window].copy()

            plan = self._plan_region(intent_crop, canvas_crop, mask_crop, label, seed)
            if not plan.stamps:
                return None
            local = [to_local(s.x + x0, s.y + y0, bbox) for s in plan.stamps]

            optimized = self._optimize_region(plan.stamps, intent_crop, canvas_crop,
                                              mask_crop)
            base = _canvas_mse(self.canvas, intent, mask)
            clip = mask.copy()
            for stamps_crop in (optimized, plan.stamps):
                stamps = tuple(self._lift_to_canvas(stamps_crop, bbox))
                candidate = self.canvas.copy()
                # selection-clipped rendering: nothing paints outside the mask
                self._composite_stamps(candidate, stamps, clip)
                if _canvas_mse(candidate, intent, mask) <= base:
                    self._begin_commit()
                    entry = HistoryEntry(entry_id=self._next_entry_id, kind="inpaint",
                                         stamps=stamps, clip_mask=clip)
                    self._next_entry_id += 1
                    self.canvas = candidate
                    self.history.append(entry)
                    self._finish_commit("inpaint", [entry.entry_id],
                                        self._clip_bbox(stamps_bbox(stamps)))
                    entry_local = {"label": label, "bbox": list(bbox),
                                   "local_positions": [[u, v] for u, v in local]}
                    self._emit({"type": "inpaint_detail", **entry_local})
                    return entry
            return None

    def _plan_region(self, intent_crop, canvas_crop, mask_crop, label, seed):
        """Single-region plan over the intent crop, guided by maps derived from
        the intent itself: pseudo-normals from the luminance gradient (flat
        areas first) and attention from the current residual."""
        lum = luminance(intent_crop)
        gy, gx = np.gradient(lum)
        vecs = np.stack([-gx, -gy, np.ones_like(lum)], axis=2)
        vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)
        residual = np.sum((canvas_crop - intent_crop) ** 2, axis=2)
        if residual.max() <= 0.0:
            residual = np.ones_like(residual)
        labels = LabelMap(raster=np.where(mask_crop, 0, 1).astype(np.int64),
                          order=[0], ignored=frozenset({1}), names={0: label})
        cfg = SequencerConfig(total_budget=self.config.inpaint_budget,
                              brush=self.config.ai_brush,
                              background=self.config.background,
                              optim=self.config.optim)
        return build_stroke_plan(intent_crop, labels, NormalMap(vectors=vecs),
                                 AttentionMap(weights=residual), cfg, seed)

    def _optimize_region(self, stamps, intent_crop, canvas_crop, mask_crop):
        """Joint optimization inside the crop; positions are clamped to the
        bounding box and afterwards snapped back into the mask."""
        h, w = intent_crop.shape[:2]
        layout = layout_for_stamps(list(stamps), w, h, textures=self.textures)
        cfg = replace(self.config.optim, pos_margin=0.0)
        best, _ = optimize_strokes(layout.pack(list(stamps)), layout, intent_crop,
                                   cfg, background=canvas_crop)
        refined = layout.unpack(best)
        rows, cols = np.nonzero(mask_crop)
        out = []
        for stamp in refined:
            row = min(max(int(stamp.y), 0), h - 1)
            col = min(max(int(stamp.x), 0), w - 1)
            if not mask_crop[row, col]:
                k = int(np.argmin((rows - stamp.y + 0.5) ** 2 + (cols - stamp.x + 0.5) ** 2))
                stamp = replace(stamp, x=cols[k] + 0.5, y=rows[k] + 0.5)
            out.append(stamp)
        return out

    @staticmethod
    def _lift_to_canvas(stamps, bbox):
        x0, y0 = bbox[0], bbox[1]
        return [replace(s, x=s.x + x0, y=s.y + y0) for s in stamps]

    # -- workflow: dynamic brush refinement -----------------------------------

    def dynamic_brush_refine(self, stroke_id: int) -> RefineJob:
        """Queue background refinement of one committed stroke.

        The job optimizes the stroke's stamps against the intent crop around
        its bounding box and commits through an ordered queue; jobs whose
        region the user edits first are superseded and discarded.
        """
        with self._lock:
            entry = self._entry_by_id(stroke_id)
            pad = max((s.extent() for s in entry.stamps), default=4.0)
            raw = stamps_bbox(entry.stamps, pad=pad + 2.0)
            rect = self._clip_bbox(raw)
            if rect is None:
                raise ValueError(f"stroke {stroke_id} lies outside the canvas")
            intent = self._require_intent().predict(self.canvas)
            x0, y0, w, h = rect
            window = (slice(y0, y0 + h), slice(x0, x0 + w))
            others = [e for e in self.history if e.entry_id != stroke_id]
            background = self.replay(others)[window].copy()
            intent_crop = intent[window].copy()
            job = RefineJob(job_id=self._next_job_id, stroke_id=stroke_id, rect=rect)
            self._next_job_id += 1
            self.jobs[job.job_id] = job
            self._job_queue.append(job.job_id)
            if self._executor is None:
                self._executor = ThreadPoolExecutor(
                    max_workers=self.config.refine_workers,
                    thread_name_prefix="refine")
            stamps = entry.stamps
            self._executor.submit(self._run_refine, job.job_id, stamps, rect,
                                  background, intent_crop)
            self._emit({"type": "job", "job_id": job.job_id, "status": "pending"})
            return job

    def _run_refine(self, job_id: int, stamps, rect, background, intent_crop) -> None:
        try:
            delay = self.refine_delays.get(job_id, 0.0)
            if delay:
                time.sleep(delay)
            x0, y0, w, h = rect
            local = [replace(s, x=s.x - x0, y=s.y - y0) for s in stamps]
            layout = layout_for_stamps(local, w, h, textures=self.textures)
            best, _ = optimize_strokes(layout.pack(local), layout, intent_crop,
                                       self.config.optim, background=background)
            refined = tuple(replace(s, x=s.x + x0, y=s.y + y0)
                            for s in layout.unpack(best))
        except Exception:
            refined = tuple(stamps)  # failed refinement commits the original
        with self._lock:
            self._job_ready[job_id] = refined
            self._flush_jobs()

    def _flush_jobs(self) -> None:
        while self._job_queue:
            job_id = self._job_queue[0]
            job = self.jobs[job_id]
            if job.status == "superseded":
                self._job_queue.pop(0)
                self._job_ready.pop(job_id, None)
                self._emit({"type": "job", "job_id": job_id, "status": "superseded"})
                continue
            if job_id not in self._job_ready:
                return
            self._job_queue.pop(0)
            result = self._job_ready.pop(job_id)
            job.result = result
            job.status = "done"
            idx = next((i for i, e in enumerate(self.history)
                        if e.entry_id == job.stroke_id), None)
            if idx is None:
                job.status = "superseded"
                self._emit({"type": "job", "job_id": job_id, "status": "superseded"})
                continue
            self._begin_commit()
            self.history[idx] = replace(self.history[idx], stamps=result, modified=True)
            self.canvas = self.replay(self.history)
            self._finish_commit("refine", [job.stroke_id], job.rect, supersede=False)
            self._emit({"type": "job", "job_id": job_id, "status": "done"})

    def _supersede_jobs(self, bbox: tuple[int, int, int, int] | None) -> None:
        """User edits win: pending jobs whose crop intersects the edited
        region (or all of them, when the edit has no bbox) are discarded."""
        for job_id in self._job_queue:
            job = self.jobs[job_id]
            if job.status != "pending":
                continue
            if bbox is None or _rects_intersect(job.rect, bbox):
                job.status = "superseded"

    def _entry_by_id(self, entry_id: int) -> HistoryEntry:
        for entry in self.history:
            if entry.entry_id == entry_id:
                return entry
        raise KeyError(f"unknown stroke id {entry_id}")

    def drain_jobs(self, timeout: float = 30.0) -> None:
        """Block until every queued refine job is committed or superseded."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                self._flush_jobs()
                if not self._job_queue:
                    return
            time.sleep(0.005)
        raise TimeoutError("refine jobs did not settle in time")

    # -- undo / redo ---------------------------------------------------------

    def undo(self) -> bool:
        """Revert the last commit; False when there is nothing to undo."""
        with self._lock:
            if not self._undo:
                return False
            self._redo.append(self._snapshot())
            self._restore(self._undo.pop())
            self._supersede_jobs(None)
            self._emit({"type": "history", "op": "undo", "entry_ids": [],
                        "history_len": len(self.history), "bbox": None})
            return True

    def redo(self) -> bool:
        with self._lock:
            if not self._redo:
                return False
            self._undo.append(self._snapshot())
            self._restore(self._redo.pop())
            self._supersede_jobs(None)
            self._emit({"type": "history", "op": "redo", "entry_ids": [],
                        "history_len": len(self.history), "bbox": None})
            return True

    # -- persistence -----------------------------------------------------------

    def to_document(self) -> SessionDocument:
        entries = []
        for entry in self.history:
            if entry.kind == "stroke":
                entries.append(DocEntry(kind="stroke", record=entry.record,
                                        stamps=entry.stamps if entry.modified else None))
            else:
                mode = entry.stamps[0].mode if entry.stamps else self.config.ai_brush
                entries.append(DocEntry(kind=entry.kind, stamps=entry.stamps, mode=mode,
                                        clip_mask=entry.clip_mask))
        return SessionDocument(
            width=self.config.width, height=self.config.height,
            background=tuple(self.config.background), entries=entries,
            textures={k: texture_hash(v) for k, v in sorted(self.textures.items())})


def session_from_document(doc: SessionDocument, config: SessionConfig | None = None,
                          intent: IntentProvider | None = None,
                          textures: dict[str, np.ndarray] | None = None) -> Session:
    """Rebuild a live session from a loaded document by replaying its entries."""
    config = config or SessionConfig()
    config = replace(config, width=doc.width, height=doc.height,
                     background=tuple(doc.background))
    session = Session(config, intent=intent)
    for texture_id, texture in (textures or {}).items():
        session.add_texture(texture_id, texture)
    for entry in doc.entries:
        if entry.kind == "stroke":
            if entry.stamps is not None:
                stamps = entry.stamps
                modified = True
            else:
                cfg = PressureConfig.for_base_size(entry.record.base_size,
                                                   config.stroke_min_fraction)
                stamps = tuple(plan_stamps(entry.record, cfg))
                modified = False
            live = HistoryEntry(entry_id=session._next_entry_id, kind="stroke",
                                stamps=stamps, record=entry.record, modified=modified)
        else:
            live = HistoryEntry(entry_id=session._next_entry_id, kind=entry.kind,
                                stamps=entry.stamps or (), clip_mask=entry.clip_mask)
        session._next_entry_id += 1
        session._composite_entry(session.canvas, live)
        session.history.append(live)
    return session


def _rects_intersect(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    return ax0 < bx0 + bw and bx0 < ax0 + aw and ay0 < by0 + bh and by0 < ay0 + ah
