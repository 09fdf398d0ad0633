"""Explain time-domain time-series classifiers in invertible explanation spaces."""

__version__ = "0.1.0"

from .attribution import (
    Attribution,
    MethodConfig,
    METHODS,
    calibrate_decomposition,
    compute,
    deeplift,
    gradient_shap,
    guided_backprop,
    input_x_gradient,
    integrated_gradients,
    kernel_shap,
    lime,
    occlusion,
    saliency,
)
from .data import (
    Series,
    SynthSpec,
    load_ucr_tsv,
    save_ucr_tsv,
    synth_dataset,
    synth_samples,
    train_test_split,
)
from .metrics import (
    FaithfulnessConfig,
    RobustnessConfig,
    SparsityConfig,
    classifier_robustness,
    faithfulness_flip,
    shannon_entropy,
    sparsity,
    xai_robustness,
)
from .net import (
    Model,
    TrainConfig,
    TrainResult,
    WrappedClassifier,
    build_architecture,
    load_model,
    save_model,
    train,
    wrap,
)
from .plots import emit_attribution_plot, render_attribution_svg
from .runner import (
    ExperimentConfig,
    ExperimentReport,
    ReportRow,
    emit_report,
    render_report,
    run_experiment,
)
from .spaces import Space, make_space, space_from_config

__all__ = [
    "Attribution",
    "ExperimentConfig",
    "ExperimentReport",
    "FaithfulnessConfig",
    "METHODS",
    "MethodConfig",
    "Model",
    "ReportRow",
    "RobustnessConfig",
    "Series",
    "Space",
    "SparsityConfig",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "WrappedClassifier",
    "build_architecture",
    "calibrate_decomposition",
    "classifier_robustness",
    "compute",
    "deeplift",
    "emit_attribution_plot",
    "emit_report",
    "faithfulness_flip",
    "gradient_shap",
    "guided_backprop",
    "input_x_gradient",
    "integrated_gradients",
    "kernel_shap",
    "lime",
    "load_model",
    "load_ucr_tsv",
    "make_space",
    "occlusion",
    "render_attribution_svg",
    "render_report",
    "run_experiment",
    "saliency",
    "save_model",
    "save_ucr_tsv",
    "shannon_entropy",
    "space_from_config",
    "sparsity",
    "synth_dataset",
    "synth_samples",
    "train",
    "train_test_split",
    "wrap",
    "xai_robustness",
]
