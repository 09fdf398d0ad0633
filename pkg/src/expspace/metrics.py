"""Evaluation metrics: robustness, faithfulness flips, sparsity, entropy.

Robustness perturbs the explanation-space vector with Gaussian noise scaled
by lambda and the per-sample standard deviation, averaging over a fixed
number of draws.  The faithfulness flip masks every coordinate whose
normalized absolute score exceeds a threshold and reports whether the
predicted class changes.  The sparsity metric maps a min-max-normalized
absolute attribution a' to ``(sum(1 - a') / (n - 1)) ** beta``; when every
score is identical the normalization is defined as all ones, which pins the
uniform attribution at exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import Attribution, MethodConfig, compute
from .errors import AllZeroAttributionError, InvalidParamsError, TooShortError


@dataclass
class RobustnessConfig:
    lam: float = 0.01
    num_perturbations: int = 10
    seed: int = 0
    norm: str = "l2"

    def __post_init__(self):
        if self.lam < 0 or self.num_perturbations < 1:
            raise InvalidParamsError("lambda must be >= 0, draws >= 1")
        if self.norm not in ("l1", "l2", "linf"):
            raise InvalidParamsError(f"unknown norm {self.norm!r}")


@dataclass
class FaithfulnessConfig:
    threshold_eps: float = 0.05
    mask_value: float = 0.0

    def __post_init__(self):
        if not 0 < self.threshold_eps < 1:
            raise InvalidParamsError("threshold_eps must be in (0, 1)")


@dataclass
class SparsityConfig:
    beta: float = 2.0

    def __post_init__(self):
        if self.beta <= 1:
            raise InvalidParamsError("beta must be > 1")


def minmax_abs(scores: np.ndarray) -> np.ndarray:
    """Min-max of |scores|; a constant vector maps to all ones."""
    a = np.abs(np.asarray(scores, dtype=np.float64))
    span = a.max() - a.min()
    if span == 0:
        return np.ones_like(a)
    return (a - a.min()) / span


def _norm(v: np.ndarray, kind: str) -> float:
    if kind == "l1":
        return float(np.abs(v).sum())
    if kind == "linf":
        return float(np.abs(v).max())
    return float(np.linalg.norm(v))


def _perturbations(z: np.ndarray, cfg: RobustnessConfig):
    rng = np.random.default_rng(cfg.seed)
    sigma = z.std()
    for _ in range(cfg.num_perturbations):
        yield z + cfg.lam * rng.normal(0.0, sigma, z.size)


def classifier_robustness(classifier, z, cfg: RobustnessConfig | None = None) -> float:
    """Mean absolute change of the predicted-class probability under noise."""
    cfg = cfg or RobustnessConfig()
    v = np.asarray(z, dtype=np.float64)
    p = classifier.predict(v)
    c = int(np.argmax(p))
    diffs = [abs(p[c] - classifier.predict(zp)[c]) for zp in _perturbations(v, cfg)]
    return float(np.mean(diffs))


def xai_robustness(classifier, z, method: str,
                   method_cfg: MethodConfig | None = None,
                   cfg: RobustnessConfig | None = None) -> float:
    """Mean normalized distance between attributions of z and its perturbations."""
    cfg = cfg or RobustnessConfig()
    method_cfg = method_cfg or MethodConfig()
    v = np.asarray(z, dtype=np.float64)
    c = int(np.argmax(classifier.predict(v)))
    base = compute(method, classifier, v, c, method_cfg).scores
    dists = [
        _norm(base - compute(method, classifier, zp, c, method_cfg).scores, cfg.norm)
        / v.size
        for zp in _perturbations(v, cfg)
    ]
    return float(np.mean(dists))


def _placeholder_index(attribution: Attribution) -> int | None:
    return attribution.scores.size - 1 if attribution.space_id == "min_zero" else None


def faithfulness_flip(classifier, z, attribution: Attribution,
                      cfg: FaithfulnessConfig | None = None) -> bool:
    """True when masking all non-negligible coordinates flips the prediction."""
    cfg = cfg or FaithfulnessConfig()
    v = np.asarray(z, dtype=np.float64)
    normalized = minmax_abs(attribution.scores)
    mask = normalized > cfg.threshold_eps
    ph = _placeholder_index(attribution)
    if ph is not None:
        mask[ph] = False  # the stored minimum is never masked
    if not mask.any():
        return False
    masked = v.copy()
    masked[mask] = cfg.mask_value
    before = int(np.argmax(classifier.predict(v)))
    after = int(np.argmax(classifier.predict(masked)))
    return after != before


def sparsity(attribution, cfg: SparsityConfig | None = None) -> float:
    """Length-aware complexity in [0, 1]; 0 for uniform, 1 for one-hot."""
    cfg = cfg or SparsityConfig()
    if isinstance(attribution, Attribution):
        scores = attribution.scores
        ph = _placeholder_index(attribution)
        if ph is not None:
            scores = np.delete(scores, ph)
    else:
        scores = np.asarray(attribution, dtype=np.float64)
    n = scores.size
    if n < 2:
        raise TooShortError("sparsity needs at least 2 coordinates after exclusions")
    a = minmax_abs(scores)
    return float(((n - a.sum()) / (n - 1)) ** cfg.beta)


def shannon_entropy(attribution) -> float:
    """Entropy of |scores| normalized to a distribution, natural log."""
    scores = attribution.scores if isinstance(attribution, Attribution) else attribution
    a = np.abs(np.asarray(scores, dtype=np.float64))
    total = a.sum()
    if total == 0:
        raise AllZeroAttributionError("entropy needs a nonzero attribution")
    p = a / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
