"""Descriptor encoding: PCA halving, diagonal GMM, Fisher vectors, pooling.

Each descriptor type gets its own PCA basis and GMM. A video is represented
by per-type Fisher vectors (power- then L2-normalized), concatenated and
L2-normalized once more. In "joint" mode descriptors from all requested
block lengths are encoded together; in "concat" mode each length gets its
own Fisher vector against the same shared models.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .config import DESCRIPTOR_TYPES
from .errors import InsufficientDataError, LengthMismatchError
from .validation import check_matrix


def power_normalize(v):
    """Signed square root: sign(x) * sqrt(|x|), element-wise."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.sqrt(np.abs(v))


def l2_normalize(v):
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    return v / norm


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


class PcaReducer(BaseEstimator, TransformerMixin):
    """PCA onto the top n_components axes (default: half the input dim).

    Basis columns are sign-fixed so the largest-magnitude entry is positive,
    making the fit deterministic.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, "samples")
        n, d = X.shape
        k = self.n_components if self.n_components is not None else d // 2
        if k < 1:
            raise ValueError("n_components must be >= 1")
        if n < d:
            raise InsufficientDataError(f"PCA needs at least {d} samples, got {n}")
        self.mean_ = X.mean(axis=0)
        cov = np.cov(X - self.mean_, rowvar=False, bias=True).reshape(d, d)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        evecs = evecs[:, order]
        rank = int((evals > max(evals[0], 0.0) * 1e-10).sum())
        if rank < k:
            raise InsufficientDataError(
                f"covariance rank {rank} is below the requested {k} components")
        basis = evecs[:, :k]
        flip = basis[np.abs(basis).argmax(axis=0), np.arange(k)] < 0
        basis[:, flip] *= -1.0
        self.basis_ = basis
        self.eigenvalues_ = evals[:k]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) @ self.basis_

    @property
    def output_dim(self):
        return self.basis_.shape[1]


class DiagonalGmm(BaseEstimator):
    """Diagonal-covariance Gaussian mixture fit by EM.

    Means start from seeded k-means++; empty components are re-seeded from
    the point farthest from the surviving means, at most `max_reseeds` times.
    The per-iteration mean log-likelihood trace is kept in log_likelihoods_.
    """

    def __init__(self, n_components=256, seed=0, max_iter=200, tol=1e-6,
                 variance_floor_scale=1e-6, max_reseeds=3):
        self.n_components = n_components
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.variance_floor_scale = variance_floor_scale
        self.max_reseeds = max_reseeds

    def _log_weighted(self, X, chunk=65536):
        K = len(self.weights_)
        out = np.empty((len(X), K))
        base = (np.log(self.weights_)
                - 0.5 * (X.shape[1] * np.log(2.0 * np.pi) + np.log(self.variances_).sum(axis=1)))
        for lo in range(0, len(X), chunk):
            xs = X[lo:lo + chunk]
            quad = ((xs[:, None, :] - self.means_[None]) ** 2 / self.variances_[None]).sum(axis=2)
            out[lo:lo + chunk] = base[None] - 0.5 * quad
        return out

    def _kmeanspp(self, X, rng):
        n = len(X)
        centers = np.empty((self.n_components, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for k in range(1, self.n_components):
            total = d2.sum()
            if total <= 0.0:
                centers[k] = X[rng.integers(n)]
            else:
                centers[k] = X[rng.choice(n, p=d2 / total)]
            d2 = np.minimum(d2, ((X - centers[k]) ** 2).sum(axis=1))
        return centers

    def _estep_stats(self, X, chunk=65536):
        """Mean log-likelihood and sufficient statistics, chunked over rows."""
        K, d = self.n_components, X.shape[1]
        ll_total = 0.0
        nk = np.zeros(K)
        gx = np.zeros((K, d))
        gx2 = np.zeros((K, d))
        base = (np.log(self.weights_)
                - 0.5 * (d * np.log(2.0 * np.pi) + np.log(self.variances_).sum(axis=1)))
        for lo in range(0, len(X), chunk):
            xs = X[lo:lo + chunk]
            quad = ((xs[:, None, :] - self.means_[None]) ** 2 / self.variances_[None]).sum(axis=2)
            lw = base[None] - 0.5 * quad
            norm = _logsumexp(lw, axis=1)
            ll_total += float(norm.sum())
            gamma = np.exp(lw - norm[:, None])
            nk += gamma.sum(axis=0)
            gx += gamma.T @ xs
            gx2 += gamma.T @ (xs ** 2)
        return ll_total / len(X), nk, gx, gx2

    def fit(self, X, y=None):
        X = check_matrix(X, "samples")
        n, d = X.shape
        K = self.n_components
        if n < K:
            raise InsufficientDataError(f"GMM with {K} components needs >= {K} samples, got {n}")
        rng = np.random.default_rng(self.seed)
        data_var = X.var(axis=0)
        floor = np.maximum(self.variance_floor_scale * data_var, 1e-12)
        self.means_ = self._kmeanspp(X, rng)
        self.variances_ = np.tile(np.maximum(data_var, floor), (K, 1))
        self.weights_ = np.full(K, 1.0 / K)
        self.log_likelihoods_ = []
        self.n_reseeds_ = 0
        for _ in range(self.max_iter):
            ll, nk, gx, gx2 = self._estep_stats(X)
            if self.log_likelihoods_ and ll - self.log_likelihoods_[-1] < self.tol * abs(self.log_likelihoods_[-1]):
                self.log_likelihoods_.append(ll)
                break
            self.log_likelihoods_.append(ll)
            empty = nk <= n * 1e-10
            if empty.any():
                self.n_reseeds_ += int(empty.sum())
                if self.n_reseeds_ > self.max_reseeds:
                    raise InsufficientDataError(
                        f"EM re-seeded empty components more than {self.max_reseeds} times")
                d2 = ((X[:, None, :] - self.means_[None, ~empty]) ** 2).sum(axis=2).min(axis=1)
                for k in np.flatnonzero(empty):
                    self.means_[k] = X[int(np.argmax(d2))]
                    self.variances_[k] = np.maximum(data_var, floor)
                    self.weights_[k] = 1.0 / K
                self.weights_ /= self.weights_.sum()
                continue
            self.weights_ = nk / n
            self.means_ = gx / nk[:, None]
            second = gx2 / nk[:, None]
            self.variances_ = np.maximum(second - self.means_ ** 2, floor)
        self.n_iter_ = len(self.log_likelihoods_)
        return self

    def responsibilities(self, X):
        lw = self._log_weighted(np.asarray(X, dtype=np.float64))
        return np.exp(lw - _logsumexp(lw, axis=1)[:, None])

    def mean_log_likelihood(self, X):
        lw = self._log_weighted(np.asarray(X, dtype=np.float64))
        return float(_logsumexp(lw, axis=1).mean())

    @property
    def dim(self):
        return self.means_.shape[1]


def fisher_vector(X, gmm: DiagonalGmm):
    """Fisher vector of a descriptor set under a diagonal GMM.

    Output is [mean-gradient block, variance-gradient block], each laid out
    component-major; the empty set maps to the zero vector.
    """
    K, d = gmm.n_components, gmm.dim
    X = np.asarray(X, dtype=np.float64).reshape(-1, d)
    if len(X) == 0:
        return np.zeros(2 * K * d)
    n = len(X)
    g_sum = np.zeros(K)
    gx = np.zeros((K, d))
    gx2 = np.zeros((K, d))
    chunk = 65536
    for lo in range(0, n, chunk):
        xs = X[lo:lo + chunk]
        gamma = gmm.responsibilities(xs)
        g_sum += gamma.sum(axis=0)
        gx += gamma.T @ xs
        gx2 += gamma.T @ (xs ** 2)
    sigma = np.sqrt(gmm.variances_)
    # sum_i gamma_ik (x_i - mu_k) / sigma_k, expanded to avoid an (n,K,d) temp
    mu_part = (gx - g_sum[:, None] * gmm.means_) / sigma
    var_part = ((gx2 - 2.0 * gmm.means_ * gx + g_sum[:, None] * gmm.means_ ** 2)
                / gmm.variances_ - g_sum[:, None])
    mu_part /= n * np.sqrt(gmm.weights_)[:, None]
    var_part /= n * np.sqrt(2.0 * gmm.weights_)[:, None]
    return np.concatenate([mu_part.ravel(), var_part.ravel()])


class FisherVectorEncoder(BaseEstimator, TransformerMixin):
    """Per-type encoder: PCA to half dimension, then GMM Fisher vectors."""

    def __init__(self, n_gaussians=256, seed=0):
        self.n_gaussians = n_gaussians
        self.seed = seed

    def fit(self, X, y=None):
        X = check_matrix(X, "samples")
        self.pca_ = PcaReducer().fit(X)
        projected = self.pca_.transform(X)
        self.gmm_ = DiagonalGmm(n_components=self.n_gaussians, seed=self.seed).fit(projected)
        return self

    def encode(self, X):
        """Normalized Fisher vector for one descriptor set (may be empty)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size:
            X = X[None, :]
        if X.size:
            X = self.pca_.transform(X)
        fv = fisher_vector(X, self.gmm_)
        return l2_normalize(power_normalize(fv))

    def transform(self, sets):
        return np.stack([self.encode(s) for s in sets])

    @property
    def output_dim(self):
        return 2 * self.n_gaussians * self.gmm_.dim


@dataclass
class VideoRepresentation:
    """Pooled per-video vector plus the settings that produced it."""

    vector: np.ndarray
    video_id: str
    mode: str
    lengths: tuple
    n_blocks: int

    @property
    def empty(self):
        return self.n_blocks == 0


class LstmfEncoder(BaseEstimator):
    """Pools per-length descriptor sets into one video vector.

    mode "joint": descriptors from all requested lengths are merged per type
    and encoded once. mode "concat": one Fisher vector per (length, type)
    against the same shared models, concatenated length-major.
    """

    def __init__(self, n_gaussians=256, mode="joint", lengths=(15, 30, 45, 60, 75, 90), seed=0):
        self.n_gaussians = n_gaussians
        self.mode = mode
        self.lengths = tuple(int(l) for l in lengths)
        self.seed = seed

    def fit(self, samples_by_type, y=None):
        """Fit per-type PCA+GMM from descriptor sample matrices."""
        missing = [t for t in DESCRIPTOR_TYPES if t not in samples_by_type]
        if missing:
            raise InsufficientDataError(f"no samples for descriptor types {missing}")
        self.encoders_ = {}
        for i, kind in enumerate(DESCRIPTOR_TYPES):
            enc = FisherVectorEncoder(n_gaussians=self.n_gaussians, seed=self.seed + i)
            self.encoders_[kind] = enc.fit(samples_by_type[kind])
        return self

    def _check_lengths(self, lengths):
        lengths = tuple(int(l) for l in (lengths if lengths is not None else self.lengths))
        unknown = [l for l in lengths if l not in self.lengths]
        if unknown:
            raise LengthMismatchError(
                f"lengths {unknown} not covered by encoder lengths {list(self.lengths)}")
        return lengths

    def encode_video(self, descriptors_by_length, video_id="", mode=None, lengths=None):
        """Build the pooled representation from {length: {type: (n, D) array}}."""
        mode = mode or self.mode
        if mode not in ("joint", "concat"):
            raise ValueError(f"unknown pooling mode {mode!r}")
        lengths = self._check_lengths(lengths)
        n_blocks = 0
        parts = []
        if mode == "joint":
            for kind in DESCRIPTOR_TYPES:
                sets = [np.asarray(descriptors_by_length.get(l, {}).get(kind, np.empty((0,))))
                        for l in lengths]
                sets = [s.reshape(len(s), -1) if s.size else s for s in sets]
                merged = (np.concatenate([s for s in sets if s.size], axis=0)
                          if any(s.size for s in sets) else np.empty((0,)))
                if kind == "traj":
                    n_blocks += len(merged) if merged.size else 0
                parts.append(self.encoders_[kind].encode(merged))
        else:
            for l in lengths:
                for kind in DESCRIPTOR_TYPES:
                    data = np.asarray(descriptors_by_length.get(l, {}).get(kind, np.empty((0,))))
                    if kind == "traj":
                        n_blocks += len(data) if data.size else 0
                    parts.append(self.encoders_[kind].encode(data))
        vector = l2_normalize(np.concatenate(parts))
        if n_blocks == 0:
            warnings.warn(f"video {video_id or '<unnamed>'} produced no descriptors; "
                          "representation is all-zero")
        return VideoRepresentation(vector=vector, video_id=video_id, mode=mode,
                                   lengths=lengths, n_blocks=n_blocks)

    def output_dim(self, mode=None, lengths=None):
        mode = mode or self.mode
        lengths = self._check_lengths(lengths)
        per_set = sum(enc.output_dim for enc in self.encoders_.values())
        return per_set if mode == "joint" else per_set * len(lengths)

    def to_dict(self, config_hash=""):
        per_type = {}
        for kind, enc in self.encoders_.items():
            per_type[kind] = {
                "pca": {"mean": enc.pca_.mean_.tolist(), "basis": enc.pca_.basis_.tolist()},
                "gmm": {"weights": enc.gmm_.weights_.tolist(),
                        "means": enc.gmm_.means_.tolist(),
                        "variances": enc.gmm_.variances_.tolist()},
            }
        return {"version": 1, "mode": self.mode, "lengths": list(self.lengths),
                "config_hash": config_hash, "per_type": per_type}

    @classmethod
    def from_dict(cls, data):
        enc = cls(mode=data["mode"], lengths=tuple(data["lengths"]))
        enc.encoders_ = {}
        for kind, blob in data["per_type"].items():
            fve = FisherVectorEncoder()
            pca = PcaReducer()
            pca.mean_ = np.asarray(blob["pca"]["mean"], dtype=np.float64)
            pca.basis_ = np.asarray(blob["pca"]["basis"], dtype=np.float64)
            pca.eigenvalues_ = None
            gmm = DiagonalGmm()
            gmm.weights_ = np.asarray(blob["gmm"]["weights"], dtype=np.float64)
            gmm.means_ = np.asarray(blob["gmm"]["means"], dtype=np.float64)
            gmm.variances_ = np.asarray(blob["gmm"]["variances"], dtype=np.float64)
            gmm.n_components = len(gmm.weights_)
            fve.n_gaussians = gmm.n_components
            fve.pca_ = pca
            fve.gmm_ = gmm
            enc.encoders_[kind] = fve
        enc.n_gaussians = max(e.n_gaussians for e in enc.encoders_.values())
        return enc
