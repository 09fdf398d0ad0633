"""Attribution methods over a (possibly wrapped) classifier.

Every method takes the classifier, an explanation-space vector z, a target
class and a :class:`MethodConfig`, and returns per-coordinate scores aligned
with z.  Methods work identically on a base model (time domain) and on a
:class:`~expspace.net.WrappedClassifier`, which is what makes one method
usable in every space.  Stochastic methods are pure functions of the config
seed.  The default baseline is the all-zeros vector of the current space.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import (
    DegenerateRegressionError,
    LengthMismatchError,
    NonFiniteError,
    SpaceMismatchError,
    WindowTooLargeError,
)


@dataclass
class Attribution:
    scores: np.ndarray
    space_id: str
    method_id: str
    target_class: int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(self.scores)):
            raise NonFiniteError(f"{self.method_id} produced non-finite scores")


@dataclass
class MethodConfig:
    """Hyper-parameters; None means "derive the documented default from dim"."""

    baseline: np.ndarray | None = None
    ig_steps: int = 64
    gs_samples: int = 50
    gs_noise_sigma: float = 1.0
    occlusion_window: int | None = None  # max(1, dim // 20)
    occlusion_stride: int = 1
    shap_segments: int | None = None  # min(dim, 32)
    shap_coalitions: int = 500
    lime_samples: int = 500
    lime_kernel_width: float = 0.25
    deeplift_delta: float = 1e-7
    seed: int = 0
    clamp_calibration_drops: bool = False

    def __post_init__(self):
        counts = (self.ig_steps, self.gs_samples, self.shap_coalitions,
                  self.lime_samples, self.occlusion_stride)
        if any(c < 1 for c in counts):
            raise ValueError("all sample/step counts must be >= 1")
        if self.gs_noise_sigma < 0 or self.lime_kernel_width <= 0:
            raise ValueError("sigma must be >= 0 and kernel width > 0")

    def with_seed(self, seed: int) -> "MethodConfig":
        return replace(self, seed=seed)


def _space_id(classifier) -> str:
    return getattr(classifier, "space_id", "time")


def _check_vec(classifier, z) -> np.ndarray:
    v = np.asarray(z, dtype=np.float64)
    dim = getattr(classifier, "in_dim", v.size)
    if v.ndim != 1 or v.size != dim:
        raise LengthMismatchError(f"z has length {v.size}, classifier expects {dim}")
    return v


def _baseline(cfg: MethodConfig, dim: int) -> np.ndarray:
    if cfg.baseline is None:
        return np.zeros(dim)
    b = np.asarray(cfg.baseline, dtype=np.float64)
    if b.size != dim:
        raise LengthMismatchError(f"baseline has length {b.size}, expected {dim}")
    return b


def _wrap_result(classifier, scores, method_id, target_class) -> Attribution:
    return Attribution(scores, _space_id(classifier), method_id, target_class)


def saliency(classifier, z, target_class: int, cfg: MethodConfig | None = None):
    """Absolute input gradient of the target probability."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    g = classifier.input_gradient(v, target_class)
    return _wrap_result(classifier, np.abs(g), "saliency", target_class)


def input_x_gradient(classifier, z, target_class: int, cfg=None):
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    g = classifier.input_gradient(v, target_class)
    return _wrap_result(classifier, v * g, "input_x_gradient", target_class)


def integrated_gradients(classifier, z, target_class: int, cfg=None):
    """Path integral of the gradient from the baseline, trapezoidal rule."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    m = cfg.ig_steps
    weights = np.ones(m + 1)
    weights[0] = weights[-1] = 0.5
    acc = np.zeros_like(v)
    for alpha, w in zip(np.linspace(0.0, 1.0, m + 1), weights):
        acc += w * classifier.input_gradient(b + alpha * (v - b), target_class)
    scores = (v - b) * acc / m
    return _wrap_result(classifier, scores, "integrated_gradients", target_class)


def gradient_shap(classifier, z, target_class: int, cfg=None):
    """Monte-Carlo expected gradients with noisy baselines."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    rng = np.random.default_rng(cfg.seed)
    sigma = cfg.gs_noise_sigma * v.std()
    acc = np.zeros_like(v)
    for _ in range(cfg.gs_samples):
        bs = b + rng.normal(0.0, sigma, v.size) if sigma > 0 else b.copy()
        alpha = rng.uniform()
        acc += (v - bs) * classifier.input_gradient(bs + alpha * (v - bs), target_class)
    return _wrap_result(classifier, acc / cfg.gs_samples, "gradient_shap",
                        target_class)


def guided_backprop(classifier, z, target_class: int, cfg=None):
    """Backward pass where ReLUs pass only positive gradients at active units."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    g = classifier.guided_gradient(v, target_class)
    return _wrap_result(classifier, g, "guided_backprop", target_class)


def deeplift(classifier, z, target_class: int, cfg=None):
    """Rescale-rule multipliers times the input-baseline difference."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    mult = classifier.deeplift_multipliers(v, b, target_class, cfg.deeplift_delta)
    return _wrap_result(classifier, mult * (v - b), "deeplift", target_class)


def occlusion(classifier, z, target_class: int, cfg=None):
    """Mean confidence drop over sliding windows replaced by the baseline."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    dim = v.size
    window = cfg.occlusion_window or max(1, dim // 20)
    if window > dim:
        raise WindowTooLargeError(f"window {window} exceeds dim {dim}")
    ref = classifier.predict(v)[target_class]
    starts = list(range(0, dim - window + 1, cfg.occlusion_stride))
    if starts[-1] != dim - window:
        starts.append(dim - window)  # keep the tail covered
    sums = np.zeros(dim)
    counts = np.zeros(dim)
    for s in starts:
        masked = v.copy()
        masked[s : s + window] = b[s : s + window]
        drop = ref - classifier.predict(masked)[target_class]
        sums[s : s + window] += drop
        counts[s : s + window] += 1
    return _wrap_result(classifier, sums / counts, "occlusion", target_class)


def _segments(dim: int, n_segments: int) -> list[np.ndarray]:
    return np.array_split(np.arange(dim), min(n_segments, dim))


def _masked_value(classifier, v, b, segments, keep_mask, target_class) -> float:
    masked = v.copy()
    for seg, keep in zip(segments, keep_mask):
        if not keep:
            masked[seg] = b[seg]
    return classifier.predict(masked)[target_class]


def _expand_segment_scores(segments, seg_scores, dim) -> np.ndarray:
    out = np.zeros(dim)
    for seg, val in zip(segments, seg_scores):
        out[seg] = val / len(seg)
    return out


def _shapley_kernel(n_seg: int, size: int) -> float:
    from math import comb

    return (n_seg - 1) / (comb(n_seg, size) * size * (n_seg - size))


def kernel_shap(classifier, z, target_class: int, cfg=None):
    """Shapley-kernel weighted regression over contiguous segments.

    Enumerates every coalition when 2^G fits in the coalition budget (then the
    result equals exact Shapley values); otherwise samples coalitions from the
    kernel distribution.  The efficiency constraint is always enforced.
    """
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    segments = _segments(v.size, cfg.shap_segments or min(v.size, 32))
    n_seg = len(segments)
    f_empty = _masked_value(classifier, v, b, segments, [False] * n_seg, target_class)
    f_full = classifier.predict(v)[target_class]
    delta = f_full - f_empty
    if n_seg == 1:
        return _wrap_result(
            classifier, _expand_segment_scores(segments, [delta], v.size),
            "kernel_shap", target_class,
        )

    masks: list[np.ndarray] = []
    weights: list[float] = []
    if 2**n_seg <= cfg.shap_coalitions:
        for size in range(1, n_seg):
            w = _shapley_kernel(n_seg, size)
            for combo in combinations(range(n_seg), size):
                mask = np.zeros(n_seg, dtype=bool)
                mask[list(combo)] = True
                masks.append(mask)
                weights.append(w)
    else:
        rng = np.random.default_rng(cfg.seed)
        sizes = np.arange(1, n_seg)
        size_p = (n_seg - 1) / (sizes * (n_seg - sizes))
        size_p = size_p / size_p.sum()
        for _ in range(cfg.shap_coalitions):
            size = rng.choice(sizes, p=size_p)
            mask = np.zeros(n_seg, dtype=bool)
            mask[rng.choice(n_seg, size=size, replace=False)] = True
            masks.append(mask)
            weights.append(1.0)  # the kernel is already in the sampling law

    y = np.array(
        [_masked_value(classifier, v, b, segments, m, target_class) for m in masks]
    )
    M = np.array(masks, dtype=float)
    W = np.asarray(weights)
    # eliminate the last segment through the efficiency constraint
    X = M[:, :-1] - M[:, -1:]
    t = y - f_empty - M[:, -1] * delta
    lhs = (X * W[:, None]).T @ X
    rhs = (X * W[:, None]).T @ t
    try:
        head = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateRegressionError(
            "coalition matrix is singular; increase shap_coalitions"
        ) from exc
    seg_scores = np.concatenate([head, [delta - head.sum()]])
    return _wrap_result(
        classifier, _expand_segment_scores(segments, seg_scores, v.size),
        "kernel_shap", target_class,
    )


def lime(classifier, z, target_class: int, cfg=None):
    """Local ridge surrogate on Bernoulli segment masks."""
    cfg = cfg or MethodConfig()
    v = _check_vec(classifier, z)
    b = _baseline(cfg, v.size)
    segments = _segments(v.size, cfg.shap_segments or min(v.size, 32))
    n_seg = len(segments)
    rng = np.random.default_rng(cfg.seed)
    masks = rng.integers(0, 2, size=(cfg.lime_samples, n_seg)).astype(bool)
    y = np.array(
        [_masked_value(classifier, v, b, segments, m, target_class) for m in masks]
    )
    masked_frac = 1.0 - masks.mean(axis=1)
    w = np.exp(-(masked_frac**2) / cfg.lime_kernel_width**2)
    A = np.column_stack([np.ones(len(masks)), masks.astype(float)])
    penalty = 1e-3 * np.eye(n_seg + 1)
    penalty[0, 0] = 0.0  # intercept unpenalized
    lhs = (A * w[:, None]).T @ A + penalty
    rhs = (A * w[:, None]).T @ y
    try:
        coef = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateRegressionError("mask matrix is singular") from exc
    return _wrap_result(
        classifier, _expand_segment_scores(segments, coef[1:], v.size),
        "lime", target_class,
    )


def calibrate_decomposition(classifier, z, target_class: int, raw: Attribution,
                            cfg: MethodConfig | None = None) -> Attribution:
    """Reweight component blocks by their occlusion confidence drop.

    Each component block is zeroed separately; the drop in the target
    probability multiplies that block's raw scores, and the result is min-max
    normalized on absolute values so blocks whose removal changes nothing end
    up exactly zero.
    """
    cfg = cfg or MethodConfig()
    if _space_id(classifier) != "decomposition":
        raise SpaceMismatchError("calibration needs a decomposition-space classifier")
    v = _check_vec(classifier, z)
    space = classifier.space
    k, n = space.components, space.input_len
    scores = np.asarray(raw.scores, dtype=np.float64)
    if scores.size != k * n:
        raise LengthMismatchError("raw attribution does not match K*N")
    ref = classifier.predict(v)[target_class]
    calibrated = np.empty_like(scores)
    for block in range(k):
        masked = v.copy()
        masked[block * n : (block + 1) * n] = 0.0
        drop = ref - classifier.predict(masked)[target_class]
        if cfg.clamp_calibration_drops:
            drop = max(drop, 0.0)
        calibrated[block * n : (block + 1) * n] = drop * scores[
            block * n : (block + 1) * n
        ]
    mag = np.abs(calibrated)
    span = mag.max() - mag.min()
    normalized = (mag - mag.min()) / span if span > 0 else np.zeros_like(mag)
    return Attribution(normalized, raw.space_id, raw.method_id, target_class)


METHODS: dict[str, Callable] = {
    "saliency": saliency,
    "input_x_gradient": input_x_gradient,
    "integrated_gradients": integrated_gradients,
    "gradient_shap": gradient_shap,
    "guided_backprop": guided_backprop,
    "deeplift": deeplift,
    "occlusion": occlusion,
    "kernel_shap": kernel_shap,
    "lime": lime,
}

# methods whose scores flow through backpropagation and therefore spread
# uniformly over summed decomposition blocks (calibration applies)
BACKPROP_METHODS = frozenset(
    {"saliency", "input_x_gradient", "integrated_gradients", "gradient_shap",
     "guided_backprop", "deeplift"}
)


def compute(name: str, classifier, z, target_class: int,
            cfg: MethodConfig | None = None) -> Attribution:
    if name not in METHODS:
        raise KeyError(f"unknown attribution method {name!r}")
    return METHODS[name](classifier, z, target_class, cfg)
