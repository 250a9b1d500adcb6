"""Ranking metrics for multi-label predictions.

All four metrics take an l x p score matrix and an l x p ground-truth
matrix with entries in {-1, 0, +1}; a 0 marks a position excluded from
evaluation (useful for scoring only recovered hidden entries).  Ties:
a tied positive/negative score pair counts against ranking_loss (<=)
but in favor of auc (>=); rank positions break score ties by ascending
label index, so rank values are a permutation of 1..l per instance.

Degenerate rows/columns are skipped, not zero-filled: ranking_loss
drops instances lacking a positive or lacking a negative, coverage and
average_precision drop instances lacking a positive, average_auc drops
labels lacking a positive or negative instance.  Averages run over
what remains; if nothing remains the metric is undefined and raises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when every instance/label was skipped as degenerate."""


def _check(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.ndim != 2 or scores.shape != truth.shape:
        raise ValueError(
            f"scores {scores.shape} and truth {truth.shape} must be equal 2-D shapes"
        )
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    if not np.isin(truth, (-1, 0, 1)).all():
        raise ValueError("truth entries must be -1, 0 or +1")
    return scores, truth


def _ranks(f):
    # 1-based rank by descending score, ties by ascending label index
    l = f.shape[0]
    order = np.lexsort((np.arange(l), -f))
    ranks = np.empty(l, dtype=np.int64)
    ranks[order] = np.arange(1, l + 1)
    return ranks


def ranking_loss(scores, truth):
    """Mean fraction of positive/negative pairs ordered wrongly (ties count)."""
    scores, truth = _check(scores, truth)
    vals = []
    for i in range(scores.shape[1]):
        fp = scores[truth[:, i] == 1, i]
        fn = scores[truth[:, i] == -1, i]
        if fp.size == 0 or fn.size == 0:
            continue
        bad = int(np.sum(fp[:, None] <= fn[None, :]))
        vals.append(bad / (fp.size * fn.size))
    if not vals:
        raise UndefinedMetricError("ranking_loss: every instance was skipped")
    return float(np.mean(vals))


def average_auc(scores, truth):
    """Mean per-label fraction of correctly ordered instance pairs (ties count)."""
    scores, truth = _check(scores, truth)
    vals = []
    for j in range(scores.shape[0]):
        fp = scores[j, truth[j] == 1]
        fn = scores[j, truth[j] == -1]
        if fp.size == 0 or fn.size == 0:
            continue
        good = int(np.sum(fp[:, None] >= fn[None, :]))
        vals.append(good / (fp.size * fn.size))
    if not vals:
        raise UndefinedMetricError("average_auc: every label was skipped")
    return float(np.mean(vals))


def coverage(scores, truth):
    """Mean depth (worst positive's rank - 1) needed to cover all positives."""
    scores, truth = _check(scores, truth)
    vals = []
    for i in range(scores.shape[1]):
        pos = truth[:, i] == 1
        if not pos.any():
            continue
        vals.append(int(_ranks(scores[:, i])[pos].max()) - 1)
    if not vals:
        raise UndefinedMetricError("coverage: every instance was skipped")
    return float(np.mean(vals))


def average_precision(scores, truth):
    """Mean over positives of (positives ranked at or above it) / (its rank)."""
    scores, truth = _check(scores, truth)
    vals = []
    for i in range(scores.shape[1]):
        pos = truth[:, i] == 1
        if not pos.any():
            continue
        rpos = np.sort(_ranks(scores[:, i])[pos])
        vals.append(float(np.mean(np.arange(1, rpos.size + 1) / rpos)))
    if not vals:
        raise UndefinedMetricError("average_precision: every instance was skipped")
    return float(np.mean(vals))


@dataclass(frozen=True)
class EvaluationReport:
    """All four metrics plus how many rows/columns were skipped.

    skipped_instances counts instances lacking a positive or lacking a
    negative (the ranking_loss policy; coverage and average_precision
    skip the subset of those lacking a positive).  skipped_labels
    counts labels average_auc skipped.
    """

    rkl: float
    auc: float
    cvg: float
    ap: float
    skipped_instances: int
    skipped_labels: int

    def to_csv(self, comments=()):
        lines = [f"# {c}" for c in comments]
        lines.append("rkl,auc,cvg,ap,skipped_instances,skipped_labels")
        lines.append(
            f"{self.rkl:.17g},{self.auc:.17g},{self.cvg:.17g},{self.ap:.17g},"
            f"{self.skipped_instances},{self.skipped_labels}"
        )
        return "\n".join(lines) + "\n"


def evaluate(scores, truth):
    """Compute all four metrics at once.

    Args:
        scores: l x p real-valued score matrix.
        truth: l x p matrix in {-1, 0, +1}; 0 excludes a position.

    Returns:
        EvaluationReport.

    Raises:
        UndefinedMetricError: if any metric has nothing left to average.
    """
    scores, truth = _check(scores, truth)
    has_pos = (truth == 1).any(axis=0)
    has_neg = (truth == -1).any(axis=0)
    skipped_instances = int(np.sum(~(has_pos & has_neg)))
    lab_pos = (truth == 1).any(axis=1)
    lab_neg = (truth == -1).any(axis=1)
    skipped_labels = int(np.sum(~(lab_pos & lab_neg)))
    return EvaluationReport(
        rkl=ranking_loss(scores, truth),
        auc=average_auc(scores, truth),
        cvg=coverage(scores, truth),
        ap=average_precision(scores, truth),
        skipped_instances=skipped_instances,
        skipped_labels=skipped_labels,
    )
