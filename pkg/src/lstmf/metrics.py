"""Evaluation metrics and cross-validation folds.

mAcc and mAP are unweighted means over classes; ranking ties in AP are
broken by original entry order (stable sort), so results do not depend on
how the manifest happens to be ordered.
"""

import warnings

import numpy as np


def per_class_accuracy(y_true, y_pred, classes):
    """Accuracy within each class; classes without test samples are skipped."""
    y_true = np.asarray(y_true, dtype=object)
    y_pred = np.asarray(y_pred, dtype=object)
    out = {}
    for label in classes:
        mask = y_true == label
        if not mask.any():
            warnings.warn(f"class {label!r} has no test samples; excluded from mAcc")
            continue
        out[label] = float((y_pred[mask] == label).mean())
    return out


def mean_accuracy(y_true, y_pred, classes=None):
    """Unweighted mean of per-class accuracies."""
    if classes is None:
        classes = sorted(set(y_true))
    per_class = per_class_accuracy(y_true, y_pred, classes)
    if not per_class:
        raise ValueError("no class has test samples")
    return float(np.mean(list(per_class.values()))), per_class


def average_precision(relevant, scores):
    """Mean of precision@rank over the ranks of the relevant entries.

    Entries are ranked by descending score; equal scores keep their input
    order. Returns None when there are no relevant entries.
    """
    relevant = np.asarray(relevant, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if relevant.sum() == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    hits = relevant[order]
    ranks = np.flatnonzero(hits) + 1
    precisions = np.cumsum(hits)[hits.astype(bool)] / ranks
    return float(precisions.mean())


def mean_average_precision(label_sets, scores, classes):
    """Unweighted mean over classes of per-class AP.

    label_sets: per-entry collections of true labels (multilabel allowed).
    scores: (n, len(classes)) decision values.
    """
    scores = np.asarray(scores, dtype=np.float64)
    per_class = {}
    for j, label in enumerate(classes):
        relevant = np.array([label in s for s in label_sets])
        ap = average_precision(relevant, scores[:, j])
        if ap is None:
            warnings.warn(f"class {label!r} has no positives; excluded from mAP")
            continue
        per_class[label] = ap
    if not per_class:
        raise ValueError("no class has positive test samples")
    return float(np.mean(list(per_class.values()))), per_class


def leave_one_group_out(groups):
    """One fold per distinct group id: fold g trains on the rest, tests on g."""
    groups = list(groups)
    if any(g is None for g in groups):
        raise ValueError("every entry needs a group id for leave-one-group-out")
    distinct = sorted(set(groups))
    if len(distinct) < 2:
        raise ValueError("leave-one-group-out needs at least 2 groups")
    folds = []
    arr = np.asarray(groups, dtype=object)
    for g in distinct:
        test = np.flatnonzero(arr == g)
        train = np.flatnonzero(arr != g)
        folds.append((g, train, test))
    return folds
