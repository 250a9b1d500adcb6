"""Label-correlation algebra: cosine similarity, Laplacians, factors.

The solver never materializes a full Laplacian: correlation structure
is carried by low-rank factors Z with unit-norm rows, and quadratic
forms tr(F' Z Z' F) are evaluated through the factor.  The dense
cosine/Laplacian helpers exist for analysis of a label matrix and for
checking the factored path against the ground truth algebra.
"""

from __future__ import annotations

import warnings

import numpy as np


def cosine_correlation(labels):
    """Cosine similarity between label rows.

    Args:
        labels: LabelMatrix; rows are compared over all instances,
            with unobserved entries contributing zeros.

    Returns:
        l x l symmetric matrix; entries involving an all-zero label row
        are zero (including its diagonal).
    """
    Y = labels.values.astype(np.float64)
    G = Y @ Y.T
    G = (G + G.T) / 2.0
    sq = np.diag(G).copy()
    denom = np.sqrt(np.outer(sq, sq))
    nonzero = sq > 0.0
    S = np.zeros_like(G)
    mask = np.outer(nonzero, nonzero)
    S[mask] = G[mask] / denom[mask]
    return S


def laplacian_of(S):
    """Graph Laplacian diag(S 1) - S of a symmetric correlation matrix."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("correlation matrix must be square")
    scale = max(1.0, np.abs(S).max(initial=0.0))
    if np.abs(S - S.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("correlation matrix must be symmetric")
    row_sums = S.sum(axis=1)
    return np.diag(row_sums) - S


def combine_correlations(parts, weights):
    """Weighted elementwise sum of correlation matrices."""
    if len(parts) != len(weights):
        raise ValueError("need one weight per correlation matrix")
    if len(parts) == 0:
        raise ValueError("need at least one correlation matrix")
    shape = np.shape(parts[0])
    out = np.zeros(shape, dtype=np.float64)
    for S, w in zip(parts, weights):
        S = np.asarray(S, dtype=np.float64)
        if S.shape != shape:
            raise ValueError("correlation matrices must share a shape")
        out += w * S
    return out


def project_unit_rows(Z, zero_row_seed=0):
    """Scale every row of Z to unit euclidean norm.

    A row of exact zeros cannot be scaled; it is replaced by a seeded
    random unit vector and a warning is emitted.
    """
    Z = np.array(Z, dtype=np.float64, copy=True)
    norms = np.linalg.norm(Z, axis=1)
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        warnings.warn(
            f"reinitializing {zero_rows.size} zero row(s) during projection",
            stacklevel=2,
        )
        rng = np.random.default_rng(zero_row_seed)
        for r in zero_rows:
            row = rng.standard_normal(Z.shape[1])
            Z[r] = row / np.linalg.norm(row)
            norms[r] = 1.0
        nonzero = np.setdiff1d(np.arange(Z.shape[0]), zero_rows)
        Z[nonzero] /= norms[nonzero, None]
        return Z
    return Z / norms[:, None]


def init_factor(l, k, seed):
    """Random l x k factor with unit-norm rows, deterministic per seed."""
    Z = np.random.default_rng(seed).standard_normal((l, k))
    return project_unit_rows(Z)


def factored_trace(Z, F):
    """tr(F' Z Z' F) evaluated as ||Z' F||_F^2, never forming Z Z'."""
    ZtF = Z.T @ F
    return float(np.einsum("ij,ij->", ZtF, ZtF))
