"""Principal-component scores of residualized continuous traits.

All components are kept (not just the leading ones); the branch tests the
genotype against every score column.  Scores come from the SVD of the
residual matrix, whose columns are already centered because the intercept
is part of every residualization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientTraits

SINGULAR_RTOL = 1e-10


@dataclass(frozen=True)
class PCScores:
    scores: np.ndarray              # n x K_c, columns ordered by variance
    explained_variance: np.ndarray  # K_c, descending


def principal_components(residuals: np.ndarray, *, scale: bool = False) -> PCScores:
    """SVD-based principal component scores of an n-by-K residual matrix.

    ``scale=True`` standardizes each column to unit variance first
    (correlation PCA); the default works on the covariance scale.  Columns
    beyond the numerical rank are kept as exact zeros with a
    RankDeficientTraits warning.  The sign of each component is fixed so
    its largest-magnitude loading is positive.
    """
    x = np.ascontiguousarray(residuals, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("residual matrix must be 2-d and non-empty")
    n, k = x.shape
    if n <= k:
        raise ValueError(f"need more subjects ({n}) than trait columns ({k})")
    x = x - x.mean(axis=0)
    if scale:
        sd = x.std(axis=0, ddof=1)
        if np.any(sd <= 0):
            raise ValueError("cannot scale a zero-variance residual column")
        x = x / sd

    u, sing, vt = np.linalg.svd(x, full_matrices=False)
    cutoff = SINGULAR_RTOL * (sing[0] if sing.size else 0.0)
    rank = int(np.sum(sing > cutoff))
    if rank < k:
        warnings.warn(
            f"residual matrix has rank {rank} < {k}; trailing components are zero",
            RankDeficientTraits,
        )
        sing = sing.copy()
        sing[rank:] = 0.0

    # largest-magnitude loading of each kept component made positive
    flip = np.ones(k)
    for j in range(rank):
        lead = np.argmax(np.abs(vt[j]))
        if vt[j, lead] < 0:
            flip[j] = -1.0
    scores = u * (sing * flip)
    explained = sing**2 / (n - 1)
    return PCScores(scores=scores, explained_variance=explained)
