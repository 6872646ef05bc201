"""Covariate-adjusted residuals via a shared QR projection.

The genotype residual e_x = (I - H) g is the object that gets permuted, and
continuous-trait residuals feed the principal-component branch.  Both are
ordinary least squares residuals against [1 | Z]; the QR factorization of
that design is computed once per dataset and shared read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CovariateMatrix, GenotypeVector, TraitMatrix
from .errors import DegenerateGenotype, RankDeficientCovariates

VARIANCE_FLOOR = 1e-12


class CovariateDesign:
    """QR-factored [intercept | covariates] design shared by every fit."""

    def __init__(self, covariates: CovariateMatrix):
        self.covariates = covariates
        self.x = covariates.augmented()
        self.n, self.p = self.x.shape
        q, r = np.linalg.qr(self.x)
        diag = np.abs(np.diag(r))
        if diag.min() <= 1e-10 * max(diag.max(), 1.0):
            raise RankDeficientCovariates("[1 | Z] is numerically rank deficient")
        self.q = q
        self.r = r

    @property
    def m(self) -> int:
        return self.p - 1

    def residualize(self, a: np.ndarray) -> np.ndarray:
        """(I - H) a for a vector or an n-by-k matrix of columns."""
        return a - self.q @ (self.q.T @ a)

    def fitted(self, a: np.ndarray) -> np.ndarray:
        return self.q @ (self.q.T @ a)

    def solve_coeffs(self, a: np.ndarray) -> np.ndarray:
        """Least-squares coefficients of a on [1 | Z]."""
        from scipy.linalg import solve_triangular

        return solve_triangular(self.r, self.q.T @ a, lower=False)


@dataclass(frozen=True)
class ResidualVector:
    values: np.ndarray
    source_id: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


def genotype_residuals(
    g: GenotypeVector, covariates: CovariateMatrix | CovariateDesign
) -> ResidualVector:
    """OLS residual of the genotype on [1 | Z]; the permuted quantity.

    Raises DegenerateGenotype when the genotype lies in the covariate span
    (residual variance below 1e-12).
    """
    design = covariates if isinstance(covariates, CovariateDesign) else CovariateDesign(covariates)
    e = design.residualize(g.values.astype(np.float64))
    if float(e @ e) / max(len(e), 1) <= VARIANCE_FLOOR:
        raise DegenerateGenotype(
            f"SNP {g.snp_id}: genotype is explained by the covariates"
        )
    return ResidualVector(values=e, source_id=g.snp_id)


def trait_residuals(
    traits: TraitMatrix, covariates: CovariateMatrix | CovariateDesign
) -> np.ndarray:
    """OLS residuals of every continuous trait column on [1 | Z].

    Returns an n-by-K_c matrix in the order the continuous columns appear
    in the trait matrix.
    """
    idx = traits.indices_of("continuous")
    if not idx:
        raise ValueError("no continuous traits to residualize")
    design = covariates if isinstance(covariates, CovariateDesign) else CovariateDesign(covariates)
    return design.residualize(traits.values[:, idx])
