"""Evaluation metrics and run-comparison statistics.

Weighted cross-entropy is the headline metric (calibration matters for
ranking ad impressions); PR-AUC is computed as weighted average precision.
Cross-run comparisons use baseline-normalized performance with SEM and a
Welch two-sided t-test. All functions here are pure.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as _scipy_stats

from .autodiff import CLAMP_EPS

# Score direction: performance = mean(baseline cross-entropy) / model
# cross-entropy, so lower loss than baseline means a score above 1.
PERFORMANCE_FORMULA = (
    "performance = mean(baseline joint cross-entropy) / model joint cross-entropy"
    " (higher is better; baseline mean is 1 by construction)"
)


@dataclass
class MetricsRecord:
    """Per-run evaluation summary."""

    joint_ce: float
    joint_pr_auc: float
    calibration_ratio: float
    ctr_ce: Optional[float] = None
    essp_violation_rate: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.joint_pr_auc <= 1.0:
            raise ValueError(f"pr_auc must be in [0, 1], got {self.joint_pr_auc}")


@dataclass
class ComparisonStats:
    """Baseline-normalized comparison across models.

    ``mean_norm_perf[baseline]`` is exactly 1 by construction (ratio of the
    baseline mean to itself). SEMs are computed over the per-seed normalized
    scores; p-values are Welch two-sided over the same scores.
    """

    baseline: str
    models: list
    mean_norm_perf: dict
    sem: dict
    pvalues: dict = field(default_factory=dict)
    norm_scores: dict = field(default_factory=dict)


def _validate_pred_inputs(preds, labels, weights):
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if weights is None:
        weights = np.ones_like(preds)
    else:
        weights = np.asarray(weights, dtype=np.float64)
    if preds.size == 0:
        raise ValueError("empty input")
    if not (preds.shape == labels.shape == weights.shape):
        raise ValueError(
            f"shape mismatch: preds {preds.shape}, labels {labels.shape}, weights {weights.shape}")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    return preds, labels, weights


def weighted_ce(preds, labels, weights=None):
    """Weighted mean cross-entropy: sum(w * L(p, z)) / sum(w).

    Predictions are clamped into [CLAMP_EPS, 1 - CLAMP_EPS] before the logs,
    matching the training loss. Invariant to rescaling all weights by a
    common positive factor.
    """
    preds, labels, weights = _validate_pred_inputs(preds, labels, weights)
    total = weights.sum()
    if total <= 0:
        raise ValueError("sum of weights must be positive")
    p = np.clip(preds, CLAMP_EPS, 1.0 - CLAMP_EPS)
    losses = -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))
    return float(np.sum(weights * losses) / total)


def pr_auc(preds, labels, weights=None):
    """Weighted average precision (area under the precision-recall curve).

    Examples are sorted by descending prediction, ties broken by stable input
    order; weighted precision is accumulated at each positive. This matches a
    brute-force precision-at-each-positive enumeration exactly.
    """
    preds, labels, weights = _validate_pred_inputs(preds, labels, weights)
    pos_weight = np.sum(weights * labels)
    neg_weight = np.sum(weights * (1.0 - labels))
    if pos_weight <= 0 or neg_weight <= 0:
        raise ValueError("pr_auc needs at least one positive and one negative example")
    order = np.argsort(-preds, kind="stable")
    w = weights[order]
    is_pos = labels[order] > 0
    cum_w = np.cumsum(w)
    cum_pos = np.cumsum(w * is_pos)
    precision = cum_pos / cum_w
    return float(np.sum(w[is_pos] * precision[is_pos]) / pos_weight)


def calibration_ratio(preds, labels, weights=None):
    """sum(w * pred) / sum(w * label); 1.0 is perfectly calibrated in aggregate."""
    preds, labels, weights = _validate_pred_inputs(preds, labels, weights)
    denom = np.sum(weights * labels)
    if denom <= 0:
        raise ValueError("calibration_ratio needs positive label weight")
    return float(np.sum(weights * preds) / denom)


def normalized_scores(model_ces, baseline_ces):
    """Per-seed normalized performance: mean(baseline_ces) / model_ce."""
    model_ces = np.asarray(model_ces, dtype=np.float64)
    baseline_ces = np.asarray(baseline_ces, dtype=np.float64)
    if model_ces.size < 2 or baseline_ces.size < 2:
        raise ValueError("need at least 2 seeds per model")
    return float(np.mean(baseline_ces)) / model_ces


def normalized_performance(model_ces, baseline_ces):
    """(mean, sem) of baseline-normalized performance.

    The mean is the ratio of means, mean(baseline_ces) / mean(model_ces), so
    the baseline scored against itself is exactly 1. The SEM is taken over
    the per-seed scores mean(baseline_ces) / model_ce.
    """
    scores = normalized_scores(model_ces, baseline_ces)
    mean = float(np.mean(baseline_ces) / np.mean(model_ces))
    sem = float(np.std(scores, ddof=1) / np.sqrt(scores.size))
    return mean, sem


def two_sided_t_test(a, b):
    """Welch's unequal-variance two-sided t-test p-value.

    Degenerate zero-variance inputs: p = 1 when the constant samples are
    equal, p = 0 when they differ (perfect separation).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("need at least 2 samples per group")
    if np.var(a) == 0.0 and np.var(b) == 0.0:
        return 1.0 if a[0] == b[0] else 0.0
    return float(_scipy_stats.ttest_ind(a, b, equal_var=False).pvalue)


def compare_models(ces_by_model, baseline):
    """Build ComparisonStats from per-seed cross-entropies keyed by model name."""
    if baseline not in ces_by_model:
        raise ValueError(f"baseline {baseline!r} missing from results")
    models = list(ces_by_model)
    baseline_ces = np.asarray(ces_by_model[baseline], dtype=np.float64)
    means, sems, scores = {}, {}, {}
    for name, ces in ces_by_model.items():
        means[name], sems[name] = normalized_performance(ces, baseline_ces)
        scores[name] = normalized_scores(ces, baseline_ces)
    pvalues = {}
    for i, a in enumerate(models):
        for b in models[i + 1:]:
            p = two_sided_t_test(scores[a], scores[b])
            pvalues[(a, b)] = p
            pvalues[(b, a)] = p
    return ComparisonStats(baseline=baseline, models=models, mean_norm_perf=means,
                           sem=sems, pvalues=pvalues, norm_scores=scores)


def better_than_table(stats, alpha=0.01):
    """Pairs (a beats b) with higher mean score and Welch p below alpha."""
    table = {name: [] for name in stats.models}
    for a in stats.models:
        for b in stats.models:
            if a == b:
                continue
            if (stats.mean_norm_perf[a] > stats.mean_norm_perf[b]
                    and stats.pvalues[(a, b)] < alpha):
                table[a].append(b)
    return table
