"""One-vs-all linear SVMs trained by dual coordinate descent.

The bias is handled by augmenting features with a constant 1, so it is
regularized together with the weights. Coordinate order is a seeded
permutation per epoch, which makes training deterministic.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_matrix


def train_binary(X, y, C=100.0, tol=1e-4, max_epochs=1000, seed=0):
    """L2-regularized hinge-loss SVM via dual coordinate descent.

    Stops when the largest projected-gradient violation in an epoch drops
    below tol. Returns (weights, bias, objective_history) where the history
    holds the dual objective after each epoch.
    """
    X = check_matrix(X, "X")
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("train_binary needs both +1 and -1 labels")
    rng = np.random.default_rng(seed)
    Xa = np.hstack([X, np.ones((len(X), 1))])
    n, d = Xa.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    q_diag = (Xa ** 2).sum(axis=1)
    history = []
    for _ in range(max_epochs):
        worst = 0.0
        for i in rng.permutation(n):
            grad = y[i] * (w @ Xa[i]) - 1.0
            if alpha[i] == 0.0:
                violation = min(grad, 0.0)
            elif alpha[i] == C:
                violation = max(grad, 0.0)
            else:
                violation = grad
            worst = max(worst, abs(violation))
            if abs(violation) > 1e-12:
                updated = min(max(alpha[i] - grad / q_diag[i], 0.0), C)
                w += (updated - alpha[i]) * y[i] * Xa[i]
                alpha[i] = updated
        history.append(0.5 * float(w @ w) - float(alpha.sum()))
        if worst < tol:
            break
    return w[:-1], float(w[-1]), history


def _as_label_sets(y):
    """Normalize labels to per-sample sets (multilabel entries allowed)."""
    sets = []
    for item in y:
        if isinstance(item, (list, tuple, set, frozenset, np.ndarray)):
            labels = set(item)
            if not labels:
                raise ValueError("every sample needs at least one label")
            sets.append(labels)
        else:
            sets.append({item})
    return sets


class OneVsRestLinearSVM(BaseEstimator, ClassifierMixin):
    """One binary SVM per class, class-vs-rest.

    Multilabel samples count as positives for each of their classes. All
    per-class problems share the same coordinate-permutation seed.
    """

    def __init__(self, C=100.0, tol=1e-4, max_epochs=1000, random_state=0):
        self.C = C
        self.tol = tol
        self.max_epochs = max_epochs
        self.random_state = random_state

    def fit(self, X, y):
        X = check_matrix(X, "X")
        label_sets = _as_label_sets(y)
        if len(label_sets) != len(X):
            raise ValueError("X and y length mismatch")
        self.classes_ = sorted(set().union(*label_sets))
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        self.coef_ = np.zeros((len(self.classes_), X.shape[1]))
        self.intercept_ = np.zeros(len(self.classes_))
        self.objective_histories_ = []
        for idx, label in enumerate(self.classes_):
            y_bin = np.array([1.0 if label in s else -1.0 for s in label_sets])
            w, b, history = train_binary(X, y_bin, C=self.C, tol=self.tol,
                                         max_epochs=self.max_epochs, seed=self.random_state)
            self.coef_[idx] = w
            self.intercept_[idx] = b
            self.objective_histories_.append(history)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        scores = self.decision_function(X)
        return np.asarray(self.classes_, dtype=object)[scores.argmax(axis=1)]
