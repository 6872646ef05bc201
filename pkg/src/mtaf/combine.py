"""The adaptive Fisher operator and the p-value combination tree.

The operator maps a (B+1)-by-K matrix of score-test p-values (row 0 is the
observed data, rows 1..B are permutations) to a (B+1)-vector of empirical
p-values.  Within each row the p-values are sorted ascending and the partial
sums s_k = -sum of the k smallest log p are ranked column-wise across rows;
the row statistic is the minimum rank over k, itself ranked across rows.
Ties count inclusively on both comparisons, which is conservative.

All combination layers (one-sided, original+PCA, binary+continuous) stack
branch result vectors column-wise and reapply the same operator, so row b
must denote the same permutation in every branch that gets merged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, NonPositiveEntry, ShapeMismatch

P_FLOOR = 1e-300

TAIL_LOWER = "lower"
TAIL_UPPER = "upper"
TAIL_TWO_SIDED = "two_sided"


@dataclass(frozen=True)
class PValueMatrix:
    """(B+1)-by-K p-values; row 0 observed, rows 1..B permuted."""

    values: np.ndarray
    tail: str = TAIL_TWO_SIDED

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.ascontiguousarray(self.values, dtype=np.float64)
        )
        if self.values.ndim != 2:
            raise ShapeMismatch("p-value matrix must be 2-d")

    @property
    def b(self) -> int:
        return self.values.shape[0] - 1

    @property
    def k(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AFResult:
    """Empirical p-values per row; element 0 is the reported test p-value."""

    pvalues: np.ndarray

    @property
    def reported(self) -> float:
        return float(self.pvalues[0])

    def __len__(self) -> int:
        return len(self.pvalues)


@dataclass(frozen=True)
class AFStatistics:
    """Internal vectors of one operator application, kept for diagnostics."""

    s: np.ndarray        # (B+1, K) partial -log p sums over sorted rows
    p_sk: np.ndarray     # (B+1, K) column-wise upper-tail ranks of s
    t: np.ndarray        # (B+1,) row minima of p_sk
    pvalues: np.ndarray  # (B+1,) ascending ranks of t


def _checked(matrix: PValueMatrix | np.ndarray) -> np.ndarray:
    values = matrix.values if isinstance(matrix, PValueMatrix) else np.asarray(matrix, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise EmptyMatrix("p-value matrix is empty")
    if np.any(values <= 0.0) or np.any(np.isnan(values)):
        raise NonPositiveEntry("p-value <= 0 reached the combiner; clamp upstream")
    return np.clip(values, P_FLOOR, 1.0)


def _rank_upper(columns: np.ndarray) -> np.ndarray:
    """Per column: fraction of rows with value >= each entry (ties included)."""
    n = columns.shape[0]
    out = np.empty_like(columns)
    for k in range(columns.shape[1]):
        col = columns[:, k]
        order = np.sort(col)
        out[:, k] = n - np.searchsorted(order, col, side="left")
    return out / n


def _rank_lower(t: np.ndarray) -> np.ndarray:
    """Fraction of rows with value <= each entry (ties included)."""
    order = np.sort(t)
    return np.searchsorted(order, t, side="right") / len(t)


def af_statistics(matrix: PValueMatrix | np.ndarray) -> AFStatistics:
    values = _checked(matrix)
    s = np.cumsum(-np.log(np.sort(values, axis=1)), axis=1)
    p_sk = _rank_upper(s)
    t = p_sk.min(axis=1)
    return AFStatistics(s=s, p_sk=p_sk, t=t, pvalues=_rank_lower(t))


def af_operator(matrix: PValueMatrix | np.ndarray) -> AFResult:
    """Adaptive Fisher combination of a (B+1)-by-K p-value matrix."""
    return AFResult(pvalues=af_statistics(matrix).pvalues)


def minp_operator(matrix: PValueMatrix | np.ndarray) -> AFResult:
    """Baseline combiner: rank rows by their minimum p-value."""
    values = _checked(matrix)
    return AFResult(pvalues=_rank_lower(values.min(axis=1)))


def merge_af(*branches: AFResult) -> AFResult:
    """Apply the operator to branch result vectors stacked column-wise."""
    lengths = {len(b) for b in branches}
    if len(lengths) != 1:
        raise ShapeMismatch("branch p-value vectors differ in length")
    stacked = np.column_stack([b.pvalues for b in branches])
    return af_operator(stacked)


def combine_one_sided(p_lower: PValueMatrix, p_upper: PValueMatrix) -> AFResult:
    """Combine lower- and upper-tail evidence with a second operator pass."""
    if p_lower.values.shape != p_upper.values.shape:
        raise ShapeMismatch("lower/upper matrices differ in shape")
    return merge_af(af_operator(p_lower), af_operator(p_upper))


def combine_continuous(p_original: PValueMatrix, p_pca: PValueMatrix) -> AFResult:
    """Merge the original-trait branch with the principal-component branch."""
    if p_original.values.shape[0] != p_pca.values.shape[0]:
        raise ShapeMismatch("original/PCA matrices differ in permutation count")
    return merge_af(af_operator(p_original), af_operator(p_pca))


def combine_mixed(p_binary: AFResult, p_continuous: AFResult) -> AFResult:
    """Merge the binary-trait branch with the continuous-trait branch."""
    if len(p_binary) != len(p_continuous):
        raise ShapeMismatch("binary/continuous branch vectors differ in length")
    return merge_af(p_binary, p_continuous)
