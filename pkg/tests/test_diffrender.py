"""Differentiable rendering, analytic gradients, Adam, and the optimizer."""

import numpy as np
import pytest

from copaint.brush import (
    GAUSSIAN,
    HARD_ROUND,
    BrushKind,
    BrushMode,
    Stamp,
    blank_canvas,
    composite_over,
    stamp_alpha,
    stamp_alpha_gaussian,
)
from copaint.diffrender import (
    AdamState,
    OptimConfig,
    adam_step,
    compare_gradients,
    cosine_lr,
    finite_diff_grad,
    grad_loss,
    layout_for_stamps,
    loss_mse,
    optimize_strokes,
    render_diff,
    run_gradient_suite,
)


def gstamp(x=16.5, y=16.5, sx=3.0, sy=2.0, theta=0.5, color=(0.7, 0.3, 0.2)):
    return Stamp(mode=GAUSSIAN, x=x, y=y, sigma_x=sx, sigma_y=sy, theta=theta,
                 color=color)


class TestLoss:
    def test_identical_zero(self):
        a = np.random.default_rng(0).uniform(0, 1, (8, 8, 3))
        assert loss_mse(a, a) == 0.0

    def test_black_vs_white_is_three(self):
        # channel-sum, pixel-mean convention
        assert loss_mse(np.zeros((5, 7, 3)), np.ones((5, 7, 3))) == pytest.approx(3.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 1, (6, 5, 3))
        b = rng.uniform(0, 1, (6, 5, 3))
        total = 0.0
        for i in range(6):
            for j in range(5):
                for c in range(3):
                    total += (a[i, j, c] - b[i, j, c]) ** 2
        assert loss_mse(a, b) == pytest.approx(total / 30.0, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loss_mse(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


class TestRenderDiff:
    def test_zero_stamps_returns_background(self):
        layout = layout_for_stamps([], 16, 16)
        bg = blank_canvas(16, 16, (0.2, 0.5, 0.8))
        out = render_diff(layout.pack([]), layout, bg)
        assert np.array_equal(out, bg)

    def test_single_gaussian_matches_display_path_within_truncation(self):
        stamp = gstamp()
        layout = layout_for_stamps([stamp], 32, 32)
        diff = render_diff(layout.pack([stamp]), layout, blank_canvas(32, 32))
        display = blank_canvas(32, 32)
        composite_over(display, stamp_alpha_gaussian(stamp), stamp.color)
        # display path truncates the Gaussian at 4 sigma (level 3.4e-4); the
        # differentiable path keeps a wider support
        assert np.max(np.abs(diff - display)) <= 3.4e-4

    def test_occluded_stamp_color_still_matters(self):
        rear = gstamp(color=(0.1, 0.1, 0.1))
        front = gstamp(color=(0.9, 0.9, 0.9))
        layout = layout_for_stamps([rear, front], 32, 32)
        base = render_diff(layout.pack([rear, front]), layout, blank_canvas(32, 32))
        moved = render_diff(layout.pack(
            [gstamp(color=(0.5, 0.1, 0.1)), front]), layout, blank_canvas(32, 32))
        assert np.max(np.abs(base - moved)) > 1e-4


class TestGradients:
    def test_zero_gradient_at_exact_reproduction(self):
        stamps = [gstamp(), gstamp(x=10.5, y=20.5, sx=2.0, sy=2.0, theta=0.0,
                                   color=(0.2, 0.8, 0.5))]
        layout = layout_for_stamps(stamps, 32, 32)
        params = layout.pack(stamps)
        target = render_diff(params, layout, blank_canvas(32, 32))
        g = grad_loss(params, layout, target)
        assert np.max(np.abs(g)) <= 1e-8

    def test_color_gradient_matches_fd_at_spec_eps(self):
        # color enters the loss quadratically, so the 1e-4 step is exact
        stamp = gstamp()
        layout = layout_for_stamps([stamp], 32, 32)
        params = layout.pack([stamp])
        rng = np.random.default_rng(5)
        target = np.clip(rng.uniform(0, 1, (32, 32, 3)), 0, 1)
        ga = grad_loss(params, layout, target)
        gf = finite_diff_grad(params, layout, target, eps=1e-4)
        for slot in (5, 6, 7):
            assert abs(ga[slot] - gf[slot]) <= 1e-3 * max(abs(gf[slot]), 1e-9)

    def test_position_gradient_points_toward_target_blob(self):
        blob = gstamp(x=22.5, y=16.5, sx=3.0, sy=3.0, theta=0.0, color=(0.0, 0.0, 0.0))
        layout_t = layout_for_stamps([blob], 32, 32)
        target = render_diff(layout_t.pack([blob]), layout_t, blank_canvas(32, 32))
        stamp = gstamp(x=16.5, y=16.5, sx=3.0, sy=3.0, theta=0.0, color=(0.0, 0.0, 0.0))
        layout = layout_for_stamps([stamp], 32, 32)
        g = grad_loss(layout.pack([stamp]), layout, target)
        gf = finite_diff_grad(layout.pack([stamp]), layout, target, eps=1e-6)
        # moving right (+x) must decrease the loss: negative gradient
        assert g[0] < 0
        assert np.sign(g[0]) == np.sign(gf[0])

    def test_full_suite_small(self):
        rep = run_gradient_suite(n_scenes=20, seed=100)
        assert rep.passed, f"worst rel {rep.worst_rel}"

    def test_hard_round_gradients_with_soften(self):
        stamp = Stamp(mode=HARD_ROUND, x=16.2, y=15.7, r=5.0, p=0.7, theta=0.0,
                      color=(0.3, 0.4, 0.5))
        layout = layout_for_stamps([stamp], 32, 32)
        params = layout.pack([stamp])
        rng = np.random.default_rng(7)
        target = rng.uniform(0, 1, (32, 32, 3))
        ga = grad_loss(params, layout, target, soften=2.0)
        gf = finite_diff_grad(params, layout, target, eps=1e-6, soften=2.0)
        max_rel, max_abs = compare_gradients(ga, gf, rel_tol=1e-2, abs_tol=1e-5)
        assert max_rel <= 1e-2 and max_abs <= 1e-5

    def test_textured_gradients(self):
        rng = np.random.default_rng(9)
        texture = rng.uniform(0.2, 1.0, (6, 6))
        mode = BrushMode(BrushKind.BRUSH_TIP, "tex")
        stamp = Stamp(mode=mode, x=16.3, y=15.9, r=6.0, p=0.8, theta=0.4,
                      color=(0.6, 0.2, 0.7))
        layout = layout_for_stamps([stamp], 32, 32, textures={"tex": texture})
        params = layout.pack([stamp])
        target = rng.uniform(0, 1, (32, 32, 3))
        ga = grad_loss(params, layout, target)
        gf = finite_diff_grad(params, layout, target, eps=1e-6)
        # bilinear sampling is only piecewise smooth; verify to a loose gate
        max_rel, max_abs = compare_gradients(ga, gf, rel_tol=5e-2, abs_tol=1e-4)
        assert max_rel <= 5e-2 and max_abs <= 1e-4

    def test_finite_diff_quadratic_exact(self):
        # central differences are exact (to roundoff) for quadratics
        stamp = gstamp()
        layout = layout_for_stamps([stamp], 16, 16)

        def f(v):
            return float(np.sum((v - 0.3) ** 2))

        eps = 1e-4
        v = layout.pack([gstamp(x=8.5, y=8.5)])
        for k in range(v.size):
            hi, lo = v.copy(), v.copy()
            hi[k] += eps
            lo[k] -= eps
            fd = (f(hi) - f(lo)) / (2 * eps)
            assert fd == pytest.approx(2 * (v[k] - 0.3), abs=1e-9)

    def test_zero_stamp_gradient_empty(self):
        layout = layout_for_stamps([], 16, 16)
        g = grad_loss(layout.pack([]), layout, blank_canvas(16, 16))
        assert g.shape == (0,)


class TestOcclusionGradients:
    def test_weighted_vs_painter_rear_color_gradient(self):
        # two exactly overlapping stamps; front fully opaque under painter
        rear = gstamp(x=16.5, y=16.5, sx=2.5, sy=2.5, theta=0.0, color=(0.2, 0.2, 0.2))
        front = Stamp(mode=HARD_ROUND, x=16.5, y=16.5, r=12.0, p=1.0,
                      color=(0.9, 0.9, 0.9))
        target = blank_canvas(32, 32, (0.0, 0.0, 0.0))

        layout = layout_for_stamps([rear, front], 32, 32)
        params = layout.pack([rear, front])
        g = grad_loss(params, layout, target, soften=0.0)
        assert np.linalg.norm(g[5:8]) > 1e-4  # rear color slots

        def painter_loss(rear_color):
            canvas = blank_canvas(32, 32)
            s = gstamp(x=16.5, y=16.5, sx=2.5, sy=2.5, theta=0.0, color=rear_color)
            composite_over(canvas, stamp_alpha(s), s.color)
            composite_over(canvas, stamp_alpha(front), front.color)
            return loss_mse(canvas, target)

        eps = 1e-4
        for ch in range(3):
            hi = [0.2, 0.2, 0.2]
            lo = [0.2, 0.2, 0.2]
            hi[ch] += eps
            lo[ch] -= eps
            fd = (painter_loss(tuple(hi)) - painter_loss(tuple(lo))) / (2 * eps)
            assert fd == 0.0  # fully occluded: painter gradient vanishes


class TestSchedulesAndAdam:
    def test_cosine_endpoints(self):
        assert cosine_lr(0, 30, 0.02) == pytest.approx(0.02)
        assert cosine_lr(29, 30, 0.02) == pytest.approx(0.0, abs=1e-18)

    def test_cosine_midpoint_of_31(self):
        assert cosine_lr(15, 31, 1.0) == pytest.approx(0.5)

    def test_cosine_needs_two_steps(self):
        with pytest.raises(ValueError):
            cosine_lr(0, 1, 0.1)
        with pytest.raises(ValueError):
            cosine_lr(5, 5, 0.1)

    def test_adam_zero_gradient_keeps_params(self):
        params = np.array([1.0, -2.0, 3.0])
        state = AdamState.zeros(3)
        out, state2 = adam_step(params, np.zeros(3), state, lr=0.1)
        assert np.array_equal(out, params)
        assert state2.t == 1

    def test_adam_first_step_magnitude(self):
        # bias-corrected first step moves by ~lr against a unit gradient
        params = np.array([0.0])
        out, _ = adam_step(params, np.array([1.0]), AdamState.zeros(1), lr=0.05)
        assert out[0] == pytest.approx(-0.05, rel=1e-6)

    def test_adam_deterministic(self):
        params = np.array([0.3, 0.7])
        grads = np.array([0.5, -0.25])
        a1, s1 = adam_step(params, grads, AdamState.zeros(2), lr=0.01)
        a2, s2 = adam_step(params, grads, AdamState.zeros(2), lr=0.01)
        assert np.array_equal(a1, a2)
        assert np.array_equal(s1.m, s2.m) and np.array_equal(s1.v, s2.v)

    def test_adam_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), lr=0.1)


class TestOptimize:
    def test_already_optimal_early_stops_unchanged(self):
        stamps = [gstamp()]
        layout = layout_for_stamps(stamps, 32, 32)
        params = layout.pack(stamps)
        target = render_diff(params, layout, blank_canvas(32, 32))
        best, trace = optimize_strokes(params, layout, target, OptimConfig())
        assert trace.stop_reason == "early_stop"
        assert len(trace.losses) < 30
        assert np.allclose(best, params, atol=1e-6)

    def test_single_stamp_recovery_loss_drops_10x(self):
        truth = gstamp(x=32.5, y=30.5, sx=6.0, sy=4.0, theta=0.3, color=(0.2, 0.5, 0.8))
        layout_t = layout_for_stamps([truth], 64, 64)
        target = render_diff(layout_t.pack([truth]), layout_t, blank_canvas(64, 64))
        perturbed = gstamp(x=35.5, y=30.5, sx=7.2, sy=4.8, theta=0.3,
                           color=(0.3, 0.4, 0.7))
        layout = layout_for_stamps([perturbed], 64, 64)
        init = layout.pack([perturbed])
        init_loss = loss_mse(render_diff(init, layout, blank_canvas(64, 64)), target)
        best, trace = optimize_strokes(init, layout, target, OptimConfig())
        final_loss = loss_mse(render_diff(best, layout, blank_canvas(64, 64)), target)
        assert final_loss <= 0.1 * init_loss

    def test_best_seen_contract(self):
        rng = np.random.default_rng(11)
        stamps = [gstamp(x=10.5 + 4 * i, y=16.5, color=tuple(rng.uniform(0, 1, 3)))
                  for i in range(3)]
        layout = layout_for_stamps(stamps, 32, 32)
        init = layout.pack(stamps)
        target = rng.uniform(0, 1, (32, 32, 3))
        init_loss = loss_mse(render_diff(init, layout, blank_canvas(32, 32)), target)
        best, trace = optimize_strokes(init, layout, target, OptimConfig(iterations=10))
        final = loss_mse(render_diff(best, layout, blank_canvas(32, 32)), target)
        assert final <= init_loss
        assert final == pytest.approx(min([init_loss] + trace.losses), abs=1e-15)

    def test_deterministic_trace(self):
        stamps = [gstamp(color=(0.9, 0.1, 0.4))]
        layout = layout_for_stamps(stamps, 32, 32)
        init = layout.pack(stamps)
        target = blank_canvas(32, 32, (0.4, 0.4, 0.4))
        b1, t1 = optimize_strokes(init, layout, target, OptimConfig(iterations=12))
        b2, t2 = optimize_strokes(init, layout, target, OptimConfig(iterations=12))
        assert np.array_equal(b1, b2)
        assert t1.losses == t2.losses and t1.stop_reason == t2.stop_reason

    def test_clamping_respects_bounds(self):
        stamp = gstamp(x=1.5, y=1.5, sx=1.0, sy=1.0, color=(0.0, 0.0, 0.0))
        layout = layout_for_stamps([stamp], 32, 32)
        cfg = OptimConfig(iterations=15)
        target = blank_canvas(32, 32, (1.0, 1.0, 1.0))
        best, _ = optimize_strokes(layout.pack([stamp]), layout, target, cfg)
        lo, hi = layout.default_bounds(cfg)
        assert np.all(best >= lo - 1e-12) and np.all(best <= hi + 1e-12)

    def test_layout_pack_unpack_bijection(self):
        stamps = [gstamp(),
                  Stamp(mode=HARD_ROUND, x=4.0, y=8.0, r=3.0, p=0.6, theta=-0.7,
                        color=(0.1, 0.9, 0.5))]
        layout = layout_for_stamps(stamps, 48, 32)
        vec = layout.pack(stamps)
        back = layout.unpack(vec)
        assert np.allclose(layout.pack(back), vec, atol=1e-15)
        assert back[1].r == pytest.approx(3.0)
        assert back[0].sigma_y == pytest.approx(2.0)
