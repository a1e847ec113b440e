"""Command line interface.

Report-producing subcommands (gradcheck, optimize, sequence) write their
delimited output (CSV) together with a rendered matplotlib figure, so a run
leaves both machine-readable numbers and something to look at.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from .brush import GAUSSIAN, HARD_ROUND, BrushKind, blank_canvas
from .diffrender import OptimConfig, layout_for_stamps, optimize_strokes, run_gradient_suite
from .formats import (
    StrokePlan,
    export_image,
    import_image,
    load_maps,
    save_plan,
)
from .metrics import report as metric_report
from .sequencer import SequencerConfig, assign_brush_sizes, generate_dataset_entry
from .brush import Stamp


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


@click.group()
def main():
    """Stroke-based painting engine: optimization, sequencing, metrics, serving."""


@main.command()
@click.option("--scenes", default=100, show_default=True, help="Number of random scenes.")
@click.option("--seed", default=0, show_default=True)
@click.option("--report-dir", type=click.Path(path_type=Path), default=None,
              help="Write per-scene CSV and an error figure here.")
def gradcheck(scenes: int, seed: int, report_dir: Path | None):
    """Verify analytic gradients against finite differences; exit 1 on failure."""
    t0 = time.time()
    rep = run_gradient_suite(n_scenes=scenes, seed=seed)
    elapsed = time.time() - t0
    worst_abs = max((s.max_abs_err for s in rep.scenes), default=0.0)
    click.echo(f"scenes: {scenes}  worst relative error: {rep.worst_rel:.3e} "
               f"(tol {rep.rel_tol})  worst absolute: {worst_abs:.3e} "
               f"(tol {rep.abs_tol})  [{elapsed:.1f}s]")
    if report_dir is not None:
        report_dir.mkdir(parents=True, exist_ok=True)
        with open(report_dir / "gradcheck.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "stamps", "max_rel_err", "max_abs_err", "passed"])
            for s in rep.scenes:
                writer.writerow([s.seed, s.n_stamps, f"{s.max_rel_err:.6e}",
                                 f"{s.max_abs_err:.6e}", int(s.passed)])
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy([s.max_rel_err + 1e-18 for s in rep.scenes], ".", ms=4)
        ax.axhline(rep.rel_tol, color="r", ls="--", label=f"tolerance {rep.rel_tol}")
        ax.set_xlabel("scene")
        ax.set_ylabel("max relative gradient error")
        ax.legend()
        fig.tight_layout()
        fig.savefig(report_dir / "gradcheck.png", dpi=120)
        click.echo(f"report written to {report_dir}")
    if not rep.passed:
        click.echo("FAIL: gradient check exceeded tolerance", err=True)
        sys.exit(1)
    click.echo("PASS")


def _seed_stamps(target, n, mode, seed):
    """Random initial stamps: uniform positions, colors read off the target,
    linearly decaying sizes."""
    H, W = target.shape[:2]
    rng = np.random.default_rng(seed)
    sizes = assign_brush_sizes(n, 0.2 * min(H, W), 2.0)
    stamps = []
    for k in range(n):
        row = int(rng.integers(0, H))
        col = int(rng.integers(0, W))
        color = tuple(np.clip(target[row, col], 0.0, 1.0))
        if mode.kind is BrushKind.GAUSSIAN:
            stamps.append(Stamp(mode=mode, x=col + 0.5, y=row + 0.5, color=color,
                                sigma_x=sizes[k] / 2.0, sigma_y=sizes[k] / 2.0))
        else:
            stamps.append(Stamp(mode=mode, x=col + 0.5, y=row + 0.5, color=color,
                                r=sizes[k], p=0.8))
    return stamps


@main.command()
@click.option("--target", "target_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Target image (PNG).")
@click.option("--stamps", "n_stamps", default=150, show_default=True)
@click.option("--mode", type=click.Choice(["gaussian", "hard_round"]), default="gaussian",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--iterations", default=30, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True,
              help="Output stroke plan (.pcplan.json).")
@click.option("--trace", "trace_path", type=click.Path(path_type=Path), default=None,
              help="Loss-trace CSV (default: alongside the plan).")
def optimize(target_path, n_stamps, mode, seed, iterations, out_path, trace_path):
    """Fit a randomly seeded stamp set to a target image."""
    target = import_image(target_path.read_bytes())
    H, W = target.shape[:2]
    brush = GAUSSIAN if mode == "gaussian" else HARD_ROUND
    stamps = _seed_stamps(target, n_stamps, brush, seed)
    layout = layout_for_stamps(stamps, W, H)
    cfg = OptimConfig(iterations=iterations)
    background = blank_canvas(H, W)
    t0 = time.time()
    best, trace = optimize_strokes(layout.pack(stamps), layout, target, cfg,
                                   background=background)
    plan = StrokePlan(width=W, height=H, mode=brush, stamps=layout.unpack(best),
                      annotations={"seed": seed, "target": target_path.name,
                                   "stop_reason": trace.stop_reason})
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(save_plan(plan))

    trace_path = trace_path or out_path.with_suffix(".trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, loss in enumerate(trace.losses):
            writer.writerow([i, f"{loss:.9e}"])

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(trace.losses)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title(f"{n_stamps} stamps, stop: {trace.stop_reason}")
    fig.tight_layout()
    figure_path = out_path.with_suffix(".loss.png")
    fig.savefig(figure_path, dpi=120)
    click.echo(f"final loss {trace.losses[-1]:.6f} after {len(trace.losses)} iterations "
               f"[{time.time()-t0:.1f}s]")
    click.echo(f"plan: {out_path}\ntrace: {trace_path}\nfigure: {figure_path}")


@main.command()
@click.option("--target", "target_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Paletted or grayscale label PNG.")
@click.option("--normals", "normals_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Normal map PNG ([0,1] encoded).")
@click.option("--attention", "attention_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Grayscale attention PNG.")
@click.option("--order", "order_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Label order table (coarsest first).")
@click.option("--seed", default=0, show_default=True)
@click.option("--budget", default=350, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--snapshots", "snapshot_dir", type=click.Path(path_type=Path), default=None,
              help="Directory for per-stroke canvas snapshots.")
def sequence(target_path, labels_path, normals_path, attention_path, order_path,
             seed, budget, out_path, snapshot_dir):
    """Generate and optimize a coarse-to-fine stroke plan from guidance maps."""
    target = import_image(target_path.read_bytes())
    labels, normals, attention, warnings = load_maps(
        labels_path.read_bytes(), normals_path.read_bytes(),
        attention_path.read_bytes(), order_path.read_text())
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    cfg = SequencerConfig(total_budget=budget)
    t0 = time.time()
    plan, snapshots, trace = generate_dataset_entry(target, labels, normals,
                                                    attention, cfg, seed)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(save_plan(plan))
    if snapshot_dir is not None:
        snapshot_dir.mkdir(parents=True, exist_ok=True)
        for i, snap in enumerate(snapshots):
            (snapshot_dir / f"stroke_{i:04d}.png").write_bytes(export_image(snap))

    trace_path = out_path.with_suffix(".trace.csv")
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, loss in enumerate(trace.losses):
            writer.writerow([i, f"{loss:.9e}"])

    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(11, 4))
    from .formats import linear_to_srgb
    axes[0].imshow(linear_to_srgb(target))
    axes[0].set_title("target")
    axes[1].imshow(linear_to_srgb(snapshots[len(snapshots) // 3]))
    axes[1].set_title(f"after {len(snapshots) // 3} strokes")
    axes[2].imshow(linear_to_srgb(snapshots[-1]))
    axes[2].set_title(f"all {len(snapshots)} strokes")
    for ax in axes:
        ax.axis("off")
    fig.tight_layout()
    figure_path = out_path.with_suffix(".progression.png")
    fig.savefig(figure_path, dpi=120)
    click.echo(f"{len(plan.stamps)} strokes, final loss {trace.losses[-1]:.6f} "
               f"[{time.time()-t0:.1f}s]")
    click.echo(f"plan: {out_path}\ntrace: {trace_path}\nfigure: {figure_path}")


@main.command()
@click.argument("image_a", type=click.Path(exists=True, path_type=Path))
@click.argument("image_b", type=click.Path(exists=True, path_type=Path))
def metrics(image_a, image_b):
    """Print a one-line JSON metric report (mse, psnr, ssim) for two PNGs."""
    a = import_image(image_a.read_bytes())
    b = import_image(image_b.read_bytes())
    click.echo(metric_report(a, b).to_json())


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--canvas", "canvas_size", default="256x256", show_default=True,
              help="Canvas size as WxH.")
@click.option("--reference", "reference_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Reference image installed as the intent oracle.")
@click.option("--static", "static_dir", type=click.Path(exists=True, path_type=Path),
              default=None, help="Static directory to serve at / (the web client).")
def serve(host, port, canvas_size, reference_path, static_dir):
    """Run the interactive session server (JSON over HTTP long-poll)."""
    from .predictors import ReferenceOracle
    from .server import create_server
    from .session import Session, SessionConfig

    try:
        w, h = (int(v) for v in canvas_size.lower().split("x"))
    except ValueError:
        raise click.BadParameter("canvas must look like 256x256") from None
    session = Session(SessionConfig(width=w, height=h))
    if reference_path is not None:
        reference = import_image(reference_path.read_bytes())
        if reference.shape[:2] != (h, w):
            raise click.BadParameter(
                f"reference is {reference.shape[1]}x{reference.shape[0]}, canvas is {w}x{h}")
        session.set_intent(ReferenceOracle(reference=reference))
    server, _hub = create_server(session, host=host, port=port, static_dir=static_dir)
    click.echo(f"serving {w}x{h} canvas on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
