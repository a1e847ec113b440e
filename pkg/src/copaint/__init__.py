"""copaint: a stroke-based painting engine with differentiable stamp
optimization and interactive co-painting workflows."""

from .brush import (
    GAUSSIAN,
    HARD_ROUND,
    AlphaMap,
    BrushKind,
    BrushMode,
    Canvas,
    PressureConfig,
    Stamp,
    blank_canvas,
    brush_tip,
    composite_over,
    composite_weighted_sum,
    opacity_from_pressure,
    radius_from_pressure,
    smooth_pressure,
    stamp_alpha_gaussian,
    stamp_alpha_hard_round,
    stamp_alpha_textured,
)
from .diffrender import (
    LossTrace,
    OptimConfig,
    SceneLayout,
    adam_step,
    cosine_lr,
    finite_diff_grad,
    grad_loss,
    layout_for_stamps,
    loss_mse,
    optimize_strokes,
    render_diff,
    run_gradient_suite,
)
from .formats import (
    SchemaError,
    SessionDocument,
    StrokePlan,
    export_image,
    import_image,
    load_maps,
    load_plan,
    load_session,
    save_plan,
    save_session,
)
from .metrics import MetricReport, mse, psnr, ssim
from .predictors import (
    IntentProvider,
    ProposerConfig,
    ReferenceOracle,
    StrokeSpace,
    euler_integrate,
    fm_pair,
    propose_next_stroke,
)
from .sequencer import (
    AttentionMap,
    LabelMap,
    NormalMap,
    SequencerConfig,
    assign_brush_sizes,
    build_stroke_plan,
    generate_dataset_entry,
    local_normal_variance,
    sample_positions,
    score_and_order,
)
from .session import RefineJob, Session, SessionConfig, session_from_document
from .strokes import (
    SplineSegment,
    StrokeRecord,
    TabletSample,
    eval_catmull_rom,
    is_mouse_session,
    plan_stamps,
    render_stroke,
)

__version__ = "0.1.0"
