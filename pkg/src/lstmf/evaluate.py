"""Protocol driver: train/test split or leave-one-group-out, mAcc or mAP."""

import numpy as np

from .config import derive_seed
from .errors import ConfigError, ManifestError
from .metrics import leave_one_group_out, mean_average_precision, per_class_accuracy
from .svm import OneVsRestLinearSVM


def _split_fold(entries):
    train = [i for i, e in enumerate(entries) if e["split"] == "train"]
    test = [i for i, e in enumerate(entries) if e["split"] == "test"]
    if not train or not test:
        raise ManifestError("split protocol needs entries tagged split=train and split=test")
    return [("split", np.array(train), np.array(test))]


def _score_fold(X, entries, train_idx, test_idx, C, seed, fold_name):
    labels = [entries[i]["labels"] for i in train_idx]
    model = OneVsRestLinearSVM(C=C, random_state=derive_seed(seed, f"svm:{fold_name}"))
    model.fit(X[train_idx], labels)
    return model, model.decision_function(X[test_idx])


def run_protocol(X, entries, protocol, metric, C=100.0, seed=0, macc_mode="folds"):
    """Train and evaluate under a protocol; returns the report dictionary.

    macc_mode "folds" averages each class's accuracy over the folds where it
    has test samples, then over classes; "pooled" pools predictions across
    folds before the per-class accuracies.
    """
    if protocol == "split":
        folds = _split_fold(entries)
    elif protocol == "logo":
        folds = leave_one_group_out([e["group"] for e in entries])
    else:
        raise ConfigError(f"unknown protocol {protocol!r}")
    if metric not in ("macc", "map"):
        raise ConfigError(f"unknown metric {metric!r}")
    if metric == "macc":
        for e in entries:
            if len(e["labels"]) != 1:
                raise ConfigError(f"entry {e['id']!r} is multilabel; mAcc needs single labels")

    per_fold = []
    class_values = {}
    pooled_true, pooled_pred, pooled_classes = [], [], set()
    for fold_name, train_idx, test_idx in folds:
        model, scores = _score_fold(X, entries, train_idx, test_idx, C, seed, str(fold_name))
        if metric == "macc":
            y_true = [entries[i]["labels"][0] for i in test_idx]
            y_pred = list(np.asarray(model.classes_, dtype=object)[scores.argmax(axis=1)])
            fold_per_class = per_class_accuracy(y_true, y_pred, model.classes_)
            pooled_true.extend(y_true)
            pooled_pred.extend(y_pred)
            pooled_classes.update(model.classes_)
        else:
            label_sets = [set(entries[i]["labels"]) for i in test_idx]
            _, fold_per_class = mean_average_precision(label_sets, scores, model.classes_)
        for label, value in fold_per_class.items():
            class_values.setdefault(label, []).append(value)
        fold_value = float(np.mean(list(fold_per_class.values()))) if fold_per_class else 0.0
        per_fold.append({"fold": str(fold_name),
                         "value": fold_value,
                         "per_class": {str(k): v for k, v in fold_per_class.items()},
                         "n_train": int(len(train_idx)),
                         "n_test": int(len(test_idx))})

    if metric == "macc" and macc_mode == "pooled":
        per_class = per_class_accuracy(pooled_true, pooled_pred, sorted(pooled_classes))
    else:
        per_class = {label: float(np.mean(vals)) for label, vals in class_values.items()}
    value = float(np.mean(list(per_class.values())))
    return {
        "metric": metric,
        "protocol": protocol,
        "value": value,
        "per_class": {str(k): v for k, v in per_class.items()},
        "per_fold": per_fold,
        "macc_mode": macc_mode if metric == "macc" else None,
        "num_entries": len(entries),
        "C": C,
    }
