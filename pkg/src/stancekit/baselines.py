"""Reference baseline classifiers: majority class, multinomial naive
Bayes, and one-vs-rest L2-regularised logistic regression (MaxEnt).

All three operate on the same sparse count features as the GP models
and break probability ties by the fixed stance precedence.
"""

from __future__ import annotations

from collections import Counter

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit

from stancekit.sparse import stack_csr
from stancekit.stances import STANCE_ORDER, Stance


def majority_label(labels) -> Stance:
    """Most common label; precedence order breaks ties."""
    counts = Counter(labels)
    if not counts:
        raise ValueError("majority baseline needs a non-empty training set")
    best = max(counts.values())
    for s in STANCE_ORDER:
        if counts.get(s, 0) == best:
            return s
    raise AssertionError("unreachable")


class MajorityClassifier:
    def fit(self, X, labels):
        self.label_ = majority_label(labels)
        return self

    def predict(self, X):
        n = X.shape[0]
        return [self.label_] * n


class MultinomialNaiveBayes:
    """Multinomial NB over feature counts with additive smoothing."""

    def __init__(self, alpha: float = 1.0):
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        self.alpha = alpha

    def fit(self, X: sp.csr_matrix, labels):
        labels = list(labels)
        n, width = X.shape
        self.classes_ = STANCE_ORDER
        y = np.array([STANCE_ORDER.index(s) for s in labels])
        self.log_prior_ = np.full(len(STANCE_ORDER), -np.inf)
        self.log_likelihood_ = np.zeros((len(STANCE_ORDER), width))
        for k in range(len(STANCE_ORDER)):
            mask = y == k
            n_k = int(mask.sum())
            if n_k == 0:
                # class absent from training: zero prior keeps it unselectable
                self.log_likelihood_[k] = -np.log(width)
                continue
            self.log_prior_[k] = np.log(n_k / n)
            counts = np.asarray(X[mask].sum(axis=0)).ravel() + self.alpha
            self.log_likelihood_[k] = np.log(counts / counts.sum())
        return self

    def log_posterior(self, X: sp.csr_matrix) -> np.ndarray:
        return X @ self.log_likelihood_.T + self.log_prior_[None, :]

    def predict(self, X: sp.csr_matrix):
        scores = self.log_posterior(X)
        picks = np.argmax(scores, axis=1)  # first max wins = precedence order
        return [STANCE_ORDER[int(k)] for k in picks]


class LogisticRegressionOvr:
    """One-vs-rest logistic regression, L2 penalty on weights only.

    Each binary problem minimises the logistic loss plus
    ``l2_strength/2 * ||w||^2`` with L-BFGS from a zero start, so fits
    are deterministic.
    """

    def __init__(self, l2_strength: float = 1.0, max_iter: int = 200):
        if l2_strength < 0:
            raise ValueError("l2_strength must be >= 0")
        self.l2_strength = l2_strength
        self.max_iter = max_iter

    def _fit_binary(self, X, y):
        n, width = X.shape

        def objective(wb):
            w, b = wb[:width], wb[width]
            margin = y * (X @ w + b)
            # log(1 + exp(-m)) computed stably
            loss = np.logaddexp(0.0, -margin).sum() + 0.5 * self.l2_strength * w @ w
            p = expit(-margin)
            coef = -y * p
            grad_w = X.T @ coef + self.l2_strength * w
            grad_b = coef.sum()
            return loss, np.concatenate((grad_w, [grad_b]))

        res = minimize(
            objective,
            np.zeros(width + 1),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": self.max_iter},
        )
        return res.x[:width], float(res.x[width])

    def fit(self, X: sp.csr_matrix, labels):
        labels = list(labels)
        width = X.shape[1]
        self.weights_ = np.zeros((len(STANCE_ORDER), width))
        self.intercepts_ = np.zeros(len(STANCE_ORDER))
        for k, s in enumerate(STANCE_ORDER):
            y = np.array([1.0 if lab == s else -1.0 for lab in labels])
            if np.unique(y).size < 2:
                # degenerate one-vs-rest split: huge +/- intercept keeps ordering sane
                self.intercepts_[k] = 50.0 * y[0]
                continue
            self.weights_[k], self.intercepts_[k] = self._fit_binary(X, y)
        return self

    def decision_scores(self, X: sp.csr_matrix) -> np.ndarray:
        return X @ self.weights_.T + self.intercepts_[None, :]

    def predict_proba(self, X: sp.csr_matrix) -> np.ndarray:
        return expit(self.decision_scores(X))

    def predict(self, X: sp.csr_matrix):
        picks = np.argmax(self.predict_proba(X), axis=1)
        return [STANCE_ORDER[int(k)] for k in picks]


def encode_instances(vectors, width: int) -> sp.csr_matrix:
    return stack_csr(vectors, width=width)
