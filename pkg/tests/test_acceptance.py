"""Acceptance suite: every primary criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per criterion.
"""

import math
import time
from decimal import Decimal, getcontext

import numpy as np
import pytest

from copaint.brush import (
    GAUSSIAN,
    HARD_ROUND,
    PressureConfig,
    Stamp,
    blank_canvas,
    composite_over,
    opacity_from_pressure,
    radius_from_pressure,
    stamp_alpha,
)
from copaint.diffrender import (
    OptimConfig,
    grad_loss,
    layout_for_stamps,
    loss_mse,
    optimize_strokes,
    render_diff,
    run_gradient_suite,
)
from copaint.fixtures import fixture_dir, synthetic_portrait
from copaint.formats import (
    DocEntry,
    SessionDocument,
    StrokePlan,
    export_image,
    import_image,
    linear_to_srgb,
    load_maps,
    load_plan,
    load_session,
    save_plan,
    save_session,
)
from copaint.metrics import psnr
from copaint.predictors import ProposerConfig, ReferenceOracle, euler_integrate
from copaint.sequencer import (
    SequencerConfig,
    build_stroke_plan,
    generate_dataset_entry,
)
from copaint.session import COMPLETE, Session, SessionConfig
from copaint.strokes import StrokeRecord, TabletSample

getcontext().prec = 40


def _report(name: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    print(f"[ACCEPT] {name}: {status}" + (f"  ({detail})" if detail else ""))
    assert passed, f"{name}: {detail}"


def _painter(stamps, size, background=(1.0, 1.0, 1.0)):
    canvas = blank_canvas(size, size, background)
    for s in stamps:
        composite_over(canvas, stamp_alpha(s), s.color)
    return canvas


def _portrait_fixture():
    """The committed 128x128 fixture set; falls back to regenerating it."""
    d = fixture_dir()
    files = {k: d / n for k, n in (("target", "portrait_128.png"),
                                   ("labels", "labels_128.png"),
                                   ("normals", "normals_128.png"),
                                   ("attention", "attention_128.png"),
                                   ("order", "labels_128.order.txt"))}
    if all(p.exists() for p in files.values()):
        target = import_image(files["target"].read_bytes())
        labels, normals, attention, _ = load_maps(
            files["labels"].read_bytes(), files["normals"].read_bytes(),
            files["attention"].read_bytes(), files["order"].read_text())
        return target, labels, normals, attention
    return synthetic_portrait(128)


def test_gradient_suite():
    t0 = time.time()
    rep = run_gradient_suite(n_scenes=100, seed=0, size=32, max_stamps=8)
    elapsed = time.time() - t0
    worst_abs = max(s.max_abs_err for s in rep.scenes)
    _report("gradient-suite",
            rep.passed and elapsed < 60.0,
            f"100 scenes, worst rel {rep.worst_rel:.2e} <= 1e-3, "
            f"worst abs {worst_abs:.2e} <= 1e-6, {elapsed:.1f}s < 60s")


def test_pressure_curve_exactness():
    cfg = PressureConfig(r_min=2.0, r_max=20.0)
    span = Decimal(cfg.r_max) - Decimal(cfg.r_min)
    ln10 = Decimal(10).ln()
    worst_r = worst_o = 0.0
    for k in range(1000):
        p = k / 999.0
        dp = Decimal(repr(p))
        want_r = float(Decimal(cfg.r_min) + span * (1 + 9 * dp).ln() / ln10)
        got_r = radius_from_pressure(p, cfg)
        worst_r = max(worst_r, abs(got_r - want_r) / abs(want_r))
        want_o = 0.0 if dp == 0 else float((Decimal("2.5") * dp.ln()).exp())
        got_o = opacity_from_pressure(p)
        denom = max(abs(want_o), 1e-300)
        worst_o = max(worst_o, abs(got_o - want_o) / denom if want_o else abs(got_o))
    _report("pressure-curve-exactness",
            worst_r <= 1e-12 and worst_o <= 1e-12,
            f"radius rel {worst_r:.2e}, opacity rel {worst_o:.2e}, "
            "1000 grid points vs 40-digit Decimal oracle")


def test_occlusion_gradient_property():
    rear = Stamp(mode=GAUSSIAN, x=16.5, y=16.5, sigma_x=2.5, sigma_y=2.5,
                 color=(0.2, 0.2, 0.2))
    front = Stamp(mode=HARD_ROUND, x=16.5, y=16.5, r=12.0, p=1.0,
                  color=(0.9, 0.9, 0.9))
    target = blank_canvas(32, 32, (0.0, 0.0, 0.0))
    layout = layout_for_stamps([rear, front], 32, 32)
    g = grad_loss(layout.pack([rear, front]), layout, target, soften=0.0)
    weighted_norm = float(np.linalg.norm(g[5:8]))

    def painter_loss(color):
        canvas = blank_canvas(32, 32)
        s = Stamp(mode=GAUSSIAN, x=16.5, y=16.5, sigma_x=2.5, sigma_y=2.5, color=color)
        composite_over(canvas, stamp_alpha(s), s.color)
        composite_over(canvas, stamp_alpha(front), front.color)
        return loss_mse(canvas, target)

    eps = 1e-4
    painter_grad = []
    for ch in range(3):
        hi = [0.2, 0.2, 0.2]
        lo = [0.2, 0.2, 0.2]
        hi[ch] += eps
        lo[ch] -= eps
        painter_grad.append((painter_loss(tuple(hi)) - painter_loss(tuple(lo))) / (2 * eps))
    painter_norm = float(np.linalg.norm(painter_grad))
    _report("occlusion-gradient",
            painter_norm == 0.0 and weighted_norm > 1e-4,
            f"painter rear-color grad {painter_norm}, weighted {weighted_norm:.2e} > 1e-4")


def test_single_stroke_recovery():
    truth = Stamp(mode=GAUSSIAN, x=32.5, y=30.5, sigma_x=6.0, sigma_y=4.0,
                  theta=0.3, color=(0.2, 0.5, 0.8))
    layout_t = layout_for_stamps([truth], 64, 64)
    target = render_diff(layout_t.pack([truth]), layout_t, blank_canvas(64, 64))
    # perturb 3 px in position, 20% in size, 0.1 per color channel
    perturbed = Stamp(mode=GAUSSIAN, x=35.5, y=30.5, sigma_x=7.2, sigma_y=4.8,
                      theta=0.3, color=(0.3, 0.6, 0.9))
    layout = layout_for_stamps([perturbed], 64, 64)
    init = layout.pack([perturbed])
    init_loss = loss_mse(render_diff(init, layout, blank_canvas(64, 64)), target)
    t0 = time.time()
    best, _ = optimize_strokes(init, layout, target, OptimConfig(iterations=30))
    elapsed = time.time() - t0
    final_loss = loss_mse(render_diff(best, layout, blank_canvas(64, 64)), target)
    ratio = init_loss / max(final_loss, 1e-300)
    _report("single-stroke-recovery",
            final_loss <= 0.1 * init_loss and elapsed < 5.0,
            f"MSE {init_loss:.2e} -> {final_loss:.2e} ({ratio:.0f}x >= 10x), "
            f"{elapsed:.2f}s < 5s")


def test_reconstruction_fixture():
    target, labels, normals, attention = _portrait_fixture()
    cfg = SequencerConfig(total_budget=300)
    t0 = time.time()
    initial = build_stroke_plan(target, labels, normals, attention, cfg, seed=7)
    pre = psnr(_painter(initial.stamps, 128), target)
    optimized, snapshots, _ = generate_dataset_entry(target, labels, normals,
                                                     attention, cfg, seed=7)
    elapsed = time.time() - t0
    post = psnr(snapshots[-1], target)
    _report("reconstruction-fixture",
            post - pre >= 3.0 and elapsed < 300.0,
            f"painter-render PSNR {pre:.2f} -> {post:.2f} dB "
            f"(gain {post - pre:+.2f} >= 3), {elapsed:.0f}s < 300s")


def test_sequencer_ordering_oracle():
    rng = np.random.default_rng(123)
    all_match = True
    for _ in range(50):
        n = int(rng.integers(1, 60))
        sigma_hat = rng.uniform(0, 1, n)
        a_hat = rng.uniform(0, 1, n)
        from copaint.sequencer import score_order_indices
        got = list(score_order_indices(sigma_hat, a_hat))
        # independent brute force: stable ascending sort of 100*s + a
        scores = [100.0 * s + a for s, a in zip(sigma_hat, a_hat)]
        want = [i for i, _ in sorted(enumerate(scores), key=lambda kv: kv[1])]
        all_match &= got == want
    _report("sequencer-ordering-oracle", all_match,
            "50 randomized regions, exact stable-order match")


def test_euler_convergence():
    a0 = np.full(8, 0.9)
    exact = a0 * math.exp(-1.0)
    errors = []
    for steps in (4, 8, 16, 32):
        out = euler_integrate(a0, lambda a, ctx, t: -a, steps=steps)
        errors.append(float(np.max(np.abs(out - exact))))
    ratios = [fine / coarse for coarse, fine in zip(errors, errors[1:])]
    halving = all(r <= 0.6 for r in ratios)

    c = np.linspace(-0.02, 0.03, 8)
    # n sequential additions of c/n round at most n*eps*|a| ~ 6e-15 at n=64
    const_err = max(
        float(np.max(np.abs(
            euler_integrate(np.full(8, 0.4), lambda a, ctx, t: c, steps=s)
            - (np.full(8, 0.4) + c))))
        for s in (1, 7, 64))
    _report("euler-convergence", halving and const_err <= 1e-14,
            f"error ratios {['%.3f' % r for r in ratios]} all <= 0.6; "
            f"constant field within {const_err:.1e} of exact")


def _completion_config():
    return SessionConfig(width=64, height=64,
                         optim=OptimConfig(iterations=10, patience=3),
                         proposer=ProposerConfig(r_start_frac=0.15),
                         inpaint_budget=10, progress_horizon=120)


def test_workflow_monotonicity_and_lasso_containment():
    # part 1: 100 completion steps, canvas-vs-reference MSE nonincreasing
    session = Session(_completion_config())
    ref = blank_canvas(64, 64, (0.25, 0.45, 0.65))
    ref[8:30, 10:34] = (0.9, 0.3, 0.1)
    ref[38:58, 30:58] = (0.1, 0.6, 0.4)
    session.set_intent(ReferenceOracle(reference=ref))
    last = float(np.mean((session.canvas - ref) ** 2))
    monotone = True
    commits = 0
    t0 = time.time()
    for _ in range(100):
        result = session.stroke_completion_step()
        if result == COMPLETE:
            break
        cur = float(np.mean((session.canvas - ref) ** 2))
        monotone &= cur <= last + 1e-15
        last = cur
        commits += 1

    # part 2: 1000 randomized masked steps, every commit inside the mask
    session2 = Session(_completion_config())
    rng = np.random.default_rng(77)
    ref2 = rng.uniform(0, 1, (64, 64, 3))
    session2.set_intent(ReferenceOracle(reference=ref2))
    contained = True
    masked_commits = 0
    mask = None
    for step in range(1000):
        if step % 25 == 0:
            mask = np.zeros((64, 64), dtype=bool)
            r0, c0 = rng.integers(0, 40, 2)
            mask[r0:r0 + rng.integers(8, 24), c0:c0 + rng.integers(8, 24)] = True
            session2.set_lasso(mask)
        result = session2.stroke_completion_step()
        if result == COMPLETE:
            continue
        stamp = result.stamps[0]
        contained &= bool(mask[min(int(stamp.y), 63), min(int(stamp.x), 63)])
        masked_commits += 1
    elapsed = time.time() - t0
    _report("workflow-monotonicity",
            monotone and contained and commits > 10 and masked_commits > 100,
            f"{commits} open commits monotone; {masked_commits}/1000 masked commits "
            f"all inside lasso; {elapsed:.0f}s")


def test_replay_and_undo_invariants():
    session = Session(_completion_config())
    ref = blank_canvas(64, 64, (0.3, 0.3, 0.3))
    ref[16:48, 16:48] = (0.8, 0.5, 0.2)
    session.set_intent(ReferenceOracle(reference=ref))
    rng = np.random.default_rng(2024)
    mask = np.zeros((64, 64), dtype=bool)
    mask[32:60, 4:30] = True
    checkpoints = []
    ok_replay = True
    for step in range(200):
        op = rng.integers(0, 10)
        if op <= 3 or not session.history:
            xs = np.sort(rng.uniform(4, 60, 4))
            samples = tuple(TabletSample(x=float(x), y=float(rng.uniform(4, 60)),
                                         pressure=float(rng.uniform(0.3, 1)),
                                         t=10.0 * i)
                            for i, x in enumerate(xs))
            session.apply_user_stroke(StrokeRecord(
                tool=HARD_ROUND, base_size=float(rng.uniform(3, 9)),
                color=tuple(rng.uniform(0, 1, 3)), samples=samples))
        elif op <= 5:
            session.stroke_completion_step()
        elif op == 6:
            session.region_inpaint(mask, seed=int(rng.integers(1000)))
        elif op == 7:
            ids = [e.entry_id for e in session.history]
            session.dynamic_brush_refine(int(rng.choice(ids)))
        elif op == 8:
            session.undo()
        else:
            session.redo()
        if step % 25 == 24:
            session.drain_jobs()
            ok_replay &= bool(np.array_equal(session.replay(), session.canvas))
            checkpoints.append(session.snapshot_canvas())
    session.drain_jobs()
    ok_replay &= bool(np.array_equal(session.replay(), session.canvas))

    # undo/redo identity over the full stack
    final = session.snapshot_canvas()
    depth = 0
    while session.undo():
        depth += 1
    while session.redo():
        pass
    identity = bool(np.array_equal(session.snapshot_canvas(), final))
    _report("replay-undo-invariants",
            ok_replay and identity and depth > 0,
            f"200 randomized ops, replay bit-exact at 9 checkpoints, "
            f"undo x{depth} / redo identity")


def test_format_round_trips():
    rng = np.random.default_rng(99)

    def q9(v):
        return float(f"{v:.9g}")

    ok = True
    for _ in range(10):
        samples = tuple(TabletSample(x=q9(rng.uniform(0, 128)), y=q9(rng.uniform(0, 128)),
                                     pressure=q9(rng.uniform(0, 1)),
                                     t=float(i))
                        for i in range(int(rng.integers(1, 30))))
        rec = StrokeRecord(tool=HARD_ROUND, base_size=q9(rng.uniform(1, 30)),
                           color=(0.25, 0.5, 0.75), samples=samples)
        doc = SessionDocument(width=128, height=128,
                              entries=[DocEntry(kind="stroke", record=rec)])
        data = save_session(doc)
        again = load_session(data)
        ok &= again.entries[0].record == rec
        ok &= save_session(again) == data

    stamps = [Stamp(mode=GAUSSIAN, x=q9(rng.uniform(0, 64)), y=q9(rng.uniform(0, 64)),
                    sigma_x=q9(rng.uniform(0.5, 8)), sigma_y=q9(rng.uniform(0.5, 8)),
                    theta=q9(rng.uniform(-3.14, 3.14)),
                    color=(q9(rng.uniform(0, 1)), q9(rng.uniform(0, 1)),
                           q9(rng.uniform(0, 1))))
              for _ in range(40)]
    plan = StrokePlan(width=64, height=64, mode=GAUSSIAN, stamps=stamps)
    plan_data = save_plan(plan)
    plan_again = load_plan(plan_data)
    ok &= plan_again.stamps == stamps and save_plan(plan_again) == plan_data

    canvas = rng.uniform(0, 1, (32, 32, 3))
    err8 = np.abs(linear_to_srgb(import_image(export_image(canvas, 8)))
                  - linear_to_srgb(canvas)).max()
    err16 = np.abs(linear_to_srgb(import_image(export_image(canvas, 16)))
                   - linear_to_srgb(canvas)).max()
    ok &= err8 <= 1 / 255 + 1e-9 and err16 <= 1 / 65535 + 1e-12
    _report("format-round-trips", bool(ok),
            f"sessions and plans field-exact; PNG err 8-bit {err8:.2e} <= 1/255, "
            f"16-bit {err16:.2e} <= 1/65535 (one code value, sRGB domain)")
