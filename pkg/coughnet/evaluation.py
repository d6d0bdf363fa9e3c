"""
ROC analysis and fold reports.

A threshold ``t`` predicts positive iff ``score >= t``. AUC is the
trapezoidal area under the ROC curve, which equals the Mann-Whitney
statistic with ties counted as one half.
"""

import dataclasses
import logging
import math
import typing as ty

import numpy as np
import scipy.stats

from coughnet import exceptions

LOG = logging.getLogger(__name__)

TARGET_SENSITIVITY = 0.80
ACCURACY_THRESHOLD = 0.5


@dataclasses.dataclass(frozen=True, eq=False)
class RocCurve:
    """Points ``(fpr, tpr)`` from ``(0, 0)`` to ``(1, 1)``.

    ``thresholds[i]`` produced ``fpr[i], tpr[i]``; the ``(0, 0)`` anchor
    carries ``+inf``.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> ty.List[ty.Tuple[float, float]]:
        return [(float(f), float(t)) for f, t in zip(self.fpr, self.tpr)]


@dataclasses.dataclass(frozen=True)
class ConfusionMatrix:
    tp: float
    fp: float
    tn: float
    fn: float

    @property
    def sensitivity(self) -> float:
        total = self.tp + self.fn
        return self.tp / total if total else float('nan')

    @property
    def specificity(self) -> float:
        total = self.tn + self.fp
        return self.tn / total if total else float('nan')

    def to_dict(self) -> ty.Dict[str, float]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True, eq=False)
class EvalReport:
    fold: int
    auc: float
    accuracy: float
    threshold_80: float
    confusion: ConfusionMatrix
    roc: RocCurve

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            'fold': self.fold,
            'auc': self.auc,
            'accuracy': self.accuracy,
            'threshold_80': self.threshold_80,
            'confusion': self.confusion.to_dict(),
            'roc': [[f, t] for f, t in self.roc.points],
        }


@dataclasses.dataclass(frozen=True)
class AggregateReport:
    n_folds: int
    mean_auc: float
    sd_auc: float
    mean_accuracy: float
    sd_accuracy: float
    mean_confusion: ConfusionMatrix
    mean_threshold_80: float

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        data = dataclasses.asdict(self)
        data['mean_confusion'] = self.mean_confusion.to_dict()
        return data


def _validate(scores: ty.Any, labels: ty.Any):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)

    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError('scores and labels must be equal-length vectors')
    if not np.all(np.isin(labels, (0, 1))):
        raise exceptions.LabelOutOfDomain('labels must be 0 or 1')
    if not np.all(np.isfinite(scores)):
        raise ValueError('scores must be finite')

    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.shape[0]:
        raise exceptions.OneClassOnly('ROC analysis needs both classes')

    return scores, labels.astype(np.int64)


def roc_curve(scores: ty.Any, labels: ty.Any) -> RocCurve:
    """ROC curve over the distinct scores in decreasing order.

    Tied scores collapse into a single point.

    Raises:
        OneClassOnly: the labels hold a single class.
    """
    scores, labels = _validate(scores, labels)

    order = np.argsort(-scores, kind='mergesort')
    ranked = scores[order]
    hits = labels[order]

    tp = np.cumsum(hits)
    fp = np.cumsum(1 - hits)

    # last position of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(ranked)), ranked.shape[0] - 1]

    n_pos = tp[-1]
    n_neg = fp[-1]

    fpr = np.r_[0.0, fp[ends] / n_neg]
    tpr = np.r_[0.0, tp[ends] / n_pos]
    thresholds = np.r_[np.inf, ranked[ends]]

    return RocCurve(fpr, tpr, thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    widths = np.diff(curve.fpr)
    heights = (curve.tpr[1:] + curve.tpr[:-1]) / 2.0

    return float(np.sum(widths * heights))


def rank_auc(scores: ty.Any, labels: ty.Any) -> float:
    """Mann-Whitney estimate of AUC from average ranks."""
    scores, labels = _validate(scores, labels)

    ranks = scipy.stats.rankdata(scores)
    n_pos = int(labels.sum())
    n_neg = labels.shape[0] - n_pos

    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0

    return float(u / (n_pos * n_neg))


def confusion_at(
    scores: ty.Any,
    labels: ty.Any,
    threshold: float,
) -> ConfusionMatrix:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    predicted = scores >= threshold

    return ConfusionMatrix(
        tp=int(np.sum(predicted & (labels == 1))),
        fp=int(np.sum(predicted & (labels == 0))),
        tn=int(np.sum(~predicted & (labels == 0))),
        fn=int(np.sum(~predicted & (labels == 1))),
    )


def confusion_at_sensitivity(
    scores: ty.Any,
    labels: ty.Any,
    target_tpr: float = TARGET_SENSITIVITY,
) -> ty.Tuple[float, ConfusionMatrix]:
    """Confusion matrix at the largest threshold with TPR >= target.

    The achieved TPR exceeds the target when the positive count makes the
    target unattainable exactly.

    Raises:
        OneClassOnly: the labels hold a single class.
    """
    curve = roc_curve(scores, labels)

    # skip the +inf anchor; the lowest real threshold always reaches TPR 1
    qualifying = np.flatnonzero(curve.tpr[1:] >= target_tpr) + 1
    index = int(qualifying[0])
    threshold = float(curve.thresholds[index])

    matrix = confusion_at(scores, labels, threshold)

    if matrix.sensitivity > target_tpr:
        LOG.debug(
            'Sensitivity %.3f unattainable exactly; using %.3f',
            target_tpr,
            matrix.sensitivity,
        )

    return threshold, matrix


def accuracy(
    scores: ty.Any,
    labels: ty.Any,
    threshold: float = ACCURACY_THRESHOLD,
) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)

    return float(np.mean((scores >= threshold) == (labels == 1)))


def evaluate_scores(
    scores: ty.Any,
    labels: ty.Any,
    fold: int = 0,
    target_tpr: float = TARGET_SENSITIVITY,
) -> EvalReport:
    """Build the report for one fold's validation scores."""
    curve = roc_curve(scores, labels)
    threshold, matrix = confusion_at_sensitivity(scores, labels, target_tpr)

    report = EvalReport(
        fold=fold,
        auc=auc(curve),
        accuracy=accuracy(scores, labels),
        threshold_80=threshold,
        confusion=matrix,
        roc=curve,
    )

    LOG.debug(
        'Fold %d: AUC %.4f, accuracy %.4f, threshold %.4f',
        fold,
        report.auc,
        report.accuracy,
        threshold,
    )

    return report


def mean_sd(values: ty.Sequence[float]) -> ty.Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    mean = float(array.mean())
    sd = float(array.std(ddof=1)) if array.shape[0] > 1 else 0.0

    return mean, sd


def average_reports(per_fold: ty.Sequence[EvalReport]) -> AggregateReport:
    """Element-wise mean confusion, mean and sample SD of AUC/accuracy."""
    if not per_fold:
        raise ValueError('at least one report is required')

    mean_auc, sd_auc = mean_sd([r.auc for r in per_fold])
    mean_acc, sd_acc = mean_sd([r.accuracy for r in per_fold])

    def _mean(field: str) -> float:
        return float(np.mean([getattr(r.confusion, field) for r in per_fold]))

    confusion = ConfusionMatrix(
        tp=_mean('tp'), fp=_mean('fp'), tn=_mean('tn'), fn=_mean('fn')
    )

    return AggregateReport(
        n_folds=len(per_fold),
        mean_auc=mean_auc,
        sd_auc=sd_auc,
        mean_accuracy=mean_acc,
        sd_accuracy=sd_acc,
        mean_confusion=confusion,
        mean_threshold_80=float(np.mean([r.threshold_80 for r in per_fold])),
    )


def is_defined(value: float) -> bool:
    return value is not None and not math.isnan(value)
