"""
Confusion matrix and the four classification metrics
"""

import numpy as np

from uqtab.core.errors import LengthMismatch
from uqtab.shared.models import ConfusionMatrix, MetricsReport


def confusion(yhat, y) -> ConfusionMatrix:
    """
    Counts predictions against truth, class 1 = positive
    Raises:
        LengthMismatch: If the vectors differ in length
    """
    yhat = np.asarray(yhat).astype(int).ravel()
    y = np.asarray(getattr(y, "labels", y)).astype(int).ravel()
    if yhat.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{yhat.shape[0]} predictions for {y.shape[0]} labels")
    return ConfusionMatrix(
        tp=int(np.sum((yhat == 1) & (y == 1))),
        tn=int(np.sum((yhat == 0) & (y == 0))),
        fp=int(np.sum((yhat == 1) & (y == 0))),
        fn=int(np.sum((yhat == 0) & (y == 1))),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """
    accuracy = (tp+tn)/n, precision = tp/(tp+fp), recall = tp/(tp+fn),
    f1 = 2PR/(P+R)
    Zero denominators give 0 and are listed in `undefined`
    """
    if cm.total == 0:
        raise ValueError("metrics need at least one evaluated instance")

    undefined = []
    accuracy = (cm.tp + cm.tn) / cm.total

    if cm.tp + cm.fp == 0:
        precision = 0.0
        undefined.append("precision")
    else:
        precision = cm.tp / (cm.tp + cm.fp)

    if cm.tp + cm.fn == 0:
        recall = 0.0
        undefined.append("recall")
    else:
        recall = cm.tp / (cm.tp + cm.fn)

    if precision + recall == 0:
        f1 = 0.0
        undefined.append("f1")
    else:
        f1 = 2.0 * precision * recall / (precision + recall)

    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=cm,
        undefined=undefined,
    )


def evaluate(yhat, y) -> MetricsReport:
    """metrics(confusion(yhat, y))"""
    return metrics(confusion(yhat, y))
