"""Gaussian naive Bayes purchase-probability estimators.

Two variants: plain GNB, and GNB over features augmented with a one-hot
k-means cluster id (the clustered-feature variant used as the industry
baseline). The offered price always enters as an ordinary feature,
normalized by the top of the price grid, so the estimate depends on price.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EncodedDataset
from .errors import DimensionMismatch, SingleClassDataset, TooFewSamples

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GnbModel:
    """Per-class Gaussian feature likelihoods with floored variances.

    Parameters cover the encoded feature vector plus one trailing price
    column (price / p_max).
    """

    log_prior0: float
    log_prior1: float
    mean0: np.ndarray
    mean1: np.ndarray
    var0: np.ndarray
    var1: np.ndarray
    eps_var: float
    p_max: float

    @property
    def n_features(self) -> int:
        return len(self.mean0) - 1  # excluding the price column

    def _check_dim(self, features: np.ndarray):
        if features.shape[-1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {features.shape[-1]}")

    def _log_joint(self, rows: np.ndarray) -> np.ndarray:
        """Log p(y=c) + log p(x|y=c) for both classes; rows include price."""
        ll0 = -0.5 * np.sum(LOG_2PI + np.log(self.var0) + (rows - self.mean0) ** 2 / self.var0,
                            axis=-1)
        ll1 = -0.5 * np.sum(LOG_2PI + np.log(self.var1) + (rows - self.mean1) ** 2 / self.var1,
                            axis=-1)
        return np.stack([self.log_prior0 + ll0, self.log_prior1 + ll1], axis=-1)

    def predict_proba(self, features: np.ndarray, price: float) -> float:
        self._check_dim(features)
        row = np.append(features, price / self.p_max)
        joint = self._log_joint(row)
        return float(_posterior_from_joint(joint[..., 0], joint[..., 1]))

    def predict_proba_grid(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        self._check_dim(features)
        rows = np.column_stack([
            np.broadcast_to(features, (len(prices), len(features))),
            np.asarray(prices, dtype=float) / self.p_max,
        ])
        joint = self._log_joint(rows)
        return _posterior_from_joint(joint[:, 0], joint[:, 1])

    def predict_proba_rows(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        """Posterior per (row, price) pair; one row per session."""
        if features.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {features.shape[1]}")
        rows = np.column_stack([features, np.asarray(prices, dtype=float) / self.p_max])
        joint = self._log_joint(rows)
        return _posterior_from_joint(joint[:, 0], joint[:, 1])


def _posterior_from_joint(j0, j1):
    # p(y=1|x) = sigmoid(j1 - j0), computed stably and kept inside (0, 1)
    z = np.atleast_1d(np.asarray(j1 - j0, dtype=float))
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    out = np.clip(out, 1e-15, 1.0 - 1e-15)
    return out if np.ndim(j1) else float(out[0])


def fit_gnb(train: EncodedDataset, eps_var: float = 1e-6) -> GnbModel:
    """Fit class priors and per-class Gaussian feature parameters.

    Variances are floored at ``eps_var`` so constant-within-class features
    cannot produce degenerate likelihoods.
    """
    y = train.labels
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise SingleClassDataset("training data must contain both classes")

    rows = np.column_stack([train.features, train.prices / train.p_max])
    rows0, rows1 = rows[y == 0], rows[y == 1]
    return GnbModel(
        log_prior0=float(np.log(n0 / len(y))),
        log_prior1=float(np.log(n1 / len(y))),
        mean0=rows0.mean(axis=0),
        mean1=rows1.mean(axis=0),
        var0=np.maximum(rows0.var(axis=0), eps_var),
        var1=np.maximum(rows1.var(axis=0), eps_var),
        eps_var=eps_var,
        p_max=train.p_max,
    )


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray  # (k, d)
    seed: int
    iterations_run: int

    @property
    def k(self) -> int:
        return len(self.centroids)

    def assign(self, features: np.ndarray) -> np.ndarray:
        """Nearest-centroid labels; ties go to the lower cluster index."""
        pts = np.atleast_2d(features)
        d2 = ((pts[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)


def fit_kmeans(features: np.ndarray, k: int, seed: int = 0,
               max_iters: int = 100) -> KMeansModel:
    """Lloyd's algorithm from a seeded sample of k distinct starting points.

    Stops at an assignment fixpoint or after ``max_iters``. A cluster left
    empty is re-seeded to the point farthest from its current centroid.
    """
    pts = np.asarray(features, dtype=float)
    n = len(pts)
    if n < k:
        raise TooFewSamples(f"need at least k={k} samples, got {n}")

    rng = np.random.default_rng(seed)
    centroids = pts[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            members = pts[new_labels == c]
            if len(members) == 0:
                farthest = int(np.argmax(d2[np.arange(n), new_labels]))
                centroids[c] = pts[farthest]
                new_labels[farthest] = c
            else:
                centroids[c] = members.mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return KMeansModel(centroids=centroids, seed=seed, iterations_run=iterations)


@dataclass(frozen=True)
class GnbcModel:
    """GNB over features augmented with a one-hot k-means cluster id."""

    kmeans: KMeansModel
    gnb: GnbModel

    @property
    def n_features(self) -> int:
        return self.kmeans.centroids.shape[1]

    def _augment(self, features: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(features)
        if pts.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected {self.n_features} features, got {pts.shape[1]}")
        onehot = np.zeros((len(pts), self.kmeans.k))
        onehot[np.arange(len(pts)), self.kmeans.assign(pts)] = 1.0
        return np.hstack([pts, onehot])

    def predict_proba(self, features: np.ndarray, price: float) -> float:
        return self.gnb.predict_proba(self._augment(features)[0], price)

    def predict_proba_grid(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        return self.gnb.predict_proba_grid(self._augment(features)[0], prices)

    def predict_proba_rows(self, features: np.ndarray, prices: np.ndarray) -> np.ndarray:
        return self.gnb.predict_proba_rows(self._augment(features), prices)


def fit_gnbc(train: EncodedDataset, k: int = 8, seed: int = 0,
             eps_var: float = 1e-6) -> GnbcModel:
    """Cluster the encoded features, then fit GNB on the augmented matrix.

    k=1 degenerates to plain GNB: the cluster column is constant, its
    floored variance is identical in both classes, and it cancels in the
    posterior.
    """
    km = fit_kmeans(train.features, k=k, seed=seed)
    onehot = np.zeros((train.n, km.k))
    onehot[np.arange(train.n), km.assign(train.features)] = 1.0
    augmented = EncodedDataset(
        features=np.hstack([train.features, onehot]),
        prices=train.prices,
        labels=train.labels,
        p_max=train.p_max,
    )
    return GnbcModel(kmeans=km, gnb=fit_gnb(augmented, eps_var=eps_var))
