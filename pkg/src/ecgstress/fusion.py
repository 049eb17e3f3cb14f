"""Eigenvector-weighted feature fusion.

Per-modality weights are the principal eigenvector of the un-centered Gram
matrix F^T F; fused features are the column-wise weighted sum of the two
modalities. The average-fusion ablation replaces both weight vectors with
the scalar 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_JACOBI_TOL = 1e-12
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class FusionWeights:
    w1: np.ndarray
    w2: np.ndarray
    sign_convention: str = "first-nonzero-nonnegative"

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        for name, w in (("w1", w1), ("w2", w2)):
            if abs(np.linalg.norm(w) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be unit-norm")


def gram_covariance(F) -> np.ndarray:
    """Un-centered Gram matrix F^T F (no mean subtraction)."""
    F = np.asarray(F, dtype=np.float64)
    if not np.all(np.isfinite(F)):
        raise ValueError("feature matrix contains non-finite values")
    return F.T @ F


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip v so its first component of non-negligible magnitude is >= 0."""
    nz = np.flatnonzero(np.abs(v) > 1e-12 * max(1.0, np.abs(v).max()))
    if len(nz) and v[nz[0]] < 0:
        return -v
    return v


def eig_sym(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching orthonormal
    eigenvector columns, each sign-fixed so its first nonzero component is
    nonnegative.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("matrix must be symmetric")
    n = A.shape[0]
    a = (A + A.T) / 2.0
    v = np.eye(n)
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2)
        if off < _JACOBI_TOL * max(1.0, np.linalg.norm(a)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rows = np.array([p, q])
                g = a[rows, :].copy()
                a[p, :] = c * g[0] - s * g[1]
                a[q, :] = s * g[0] + c * g[1]
                g = a[:, rows].copy()
                a[:, p] = c * g[:, 0] - s * g[:, 1]
                a[:, q] = s * g[:, 0] + c * g[:, 1]
                g = v[:, rows].copy()
                v[:, p] = c * g[:, 0] - s * g[:, 1]
                v[:, q] = s * g[:, 0] + c * g[:, 1]
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = v[:, order]
    for j in range(n):
        vectors[:, j] = _fix_sign(vectors[:, j])
    return eigenvalues, vectors


def principal_weights(F) -> np.ndarray:
    """Top eigenvector of F^T F, used as per-dimension fusion weights.

    Falls back to the uniform unit vector when the Gram matrix is
    numerically zero.
    """
    gram = gram_covariance(F)
    d = gram.shape[0]
    if np.abs(gram).max() < 1e-12:
        return np.full(d, 1.0 / np.sqrt(d))
    _, vectors = eig_sym(gram)
    return vectors[:, 0].copy()


def compute_fusion_weights(F1, F2) -> FusionWeights:
    return FusionWeights(w1=principal_weights(F1), w2=principal_weights(F2))


def weighted_fuse(F1, F2, weights: FusionWeights | None = None) -> np.ndarray:
    """Column-wise weighted sum w1*F1 + w2*F2.

    Weights default to the principal eigenvectors of each modality's Gram
    matrix; pass precomputed (training-fold) weights at test time.
    """
    F1 = np.asarray(F1, dtype=np.float64)
    F2 = np.asarray(F2, dtype=np.float64)
    if F1.shape != F2.shape:
        raise ValueError(f"shape mismatch: {F1.shape} vs {F2.shape}")
    if weights is None:
        weights = compute_fusion_weights(F1, F2)
    if len(weights.w1) != F1.shape[1]:
        raise ValueError(
            f"weight length {len(weights.w1)} does not match feature dim {F1.shape[1]}"
        )
    return F1 * weights.w1[None, :] + F2 * weights.w2[None, :]


def average_fuse(F1, F2) -> np.ndarray:
    """Ablation: both weight vectors replaced by the scalar 0.5."""
    F1 = np.asarray(F1, dtype=np.float64)
    F2 = np.asarray(F2, dtype=np.float64)
    if F1.shape != F2.shape:
        raise ValueError(f"shape mismatch: {F1.shape} vs {F2.shape}")
    return 0.5 * F1 + 0.5 * F2
