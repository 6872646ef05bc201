"""Per-trait null GLM fits and score tests against a genotype vector.

Each trait gets one null fit (covariates only); that fit is then reused for
the observed genotype and every permutation of it.  The statistic is the
efficient score: u = sum (g - ghat)(y - yhat) with ghat the (working-weight)
projection of g onto the covariate span, standardized by the projected
variance so that z = u / sqrt(v) is asymptotically standard normal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import expit, ndtr

from .data import BINARY, CONTINUOUS, CovariateMatrix
from .errors import DegenerateGenotype, IrlsNonConvergence, SeparationDetected
from .residualize import CovariateDesign

P_FLOOR = 1e-300
P_CEIL = 1.0 - 1e-16
VARIANCE_FLOOR = 1e-12

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 25
SEPARATION_TOL = 1e-10


@dataclass
class NullFit:
    """Null-model fit of one trait on [1 | Z], cached for reuse.

    ``resid_adj`` is the working residual with its weighted projection onto
    the design removed, so the score numerator for any genotype row reduces
    to a single dot product.
    """

    kind: str
    fitted: np.ndarray
    weights: np.ndarray
    dispersion: float
    design: CovariateDesign
    resid: np.ndarray = field(repr=False)
    resid_adj: np.ndarray = field(repr=False)
    wx: np.ndarray | None = field(default=None, repr=False)
    xtwx_chol: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class ScoreTestResult:
    u: float
    v: float
    z: float
    p_lower: float
    p_upper: float
    p_two: float


def clamp_pvalues(p: np.ndarray | float):
    return np.clip(p, P_FLOOR, P_CEIL)


def tail_pvalues(z: np.ndarray | float):
    """(lower, upper, two-sided) normal p-values with the standard clamp."""
    p_lower = ndtr(z)
    p_upper = 1.0 - p_lower
    p_two = 2.0 * np.minimum(p_lower, p_upper)
    return clamp_pvalues(p_lower), clamp_pvalues(p_upper), clamp_pvalues(p_two)


def fit_null(
    trait_column: np.ndarray,
    kind: str,
    covariates: CovariateMatrix | CovariateDesign,
) -> NullFit:
    """Fit the covariates-only null model for one trait.

    Continuous traits use ordinary least squares with dispersion
    RSS / (n - M - 1); binary traits use logistic IRLS started at zero
    coefficients, converged when the max absolute coefficient step drops
    below 1e-8.
    """
    design = (
        covariates
        if isinstance(covariates, CovariateDesign)
        else CovariateDesign(covariates)
    )
    y = np.asarray(trait_column, dtype=np.float64)
    n = design.n

    if kind == CONTINUOUS:
        fitted = design.fitted(y)
        resid = y - fitted
        df = n - design.p
        if df <= 0:
            raise ValueError("no residual degrees of freedom for the null fit")
        dispersion = float(resid @ resid) / df
        if dispersion <= 0:
            raise ValueError("null-model residual variance is zero")
        # re-project for exact orthogonality of the cached residual
        resid_adj = design.residualize(resid)
        return NullFit(
            kind=CONTINUOUS,
            fitted=fitted,
            weights=np.ones(n),
            dispersion=dispersion,
            design=design,
            resid=resid,
            resid_adj=resid_adj,
        )

    if kind != BINARY:
        raise ValueError(f"unknown trait kind {kind!r}")

    x = design.x
    beta = np.zeros(design.p)
    converged = False
    for _ in range(IRLS_MAX_ITER):
        eta = x @ beta
        mu = expit(eta)
        w = mu * (1.0 - mu)
        if np.any(w < 1e-14):
            raise SeparationDetected("fitted probabilities collapsed to 0/1 during IRLS")
        sw = np.sqrt(w)
        work = eta + (y - mu) / w
        beta_new, *_ = np.linalg.lstsq(x * sw[:, None], work * sw, rcond=None)
        step = np.max(np.abs(beta_new - beta))
        beta = beta_new
        if step < IRLS_TOL:
            converged = True
            break
    if not converged:
        raise IrlsNonConvergence(
            f"logistic null fit did not converge in {IRLS_MAX_ITER} iterations"
        )

    mu = expit(x @ beta)
    if np.any(mu <= SEPARATION_TOL) or np.any(mu >= 1.0 - SEPARATION_TOL):
        raise SeparationDetected("a fitted probability is within 1e-10 of 0 or 1")
    w = mu * (1.0 - mu)
    resid = y - mu
    wx = x * w[:, None]
    xtwx = x.T @ wx
    chol, _ = cho_factor(xtwx, lower=True)
    coeff = cho_solve((chol, True), x.T @ resid)
    resid_adj = resid - wx @ coeff
    return NullFit(
        kind=BINARY,
        fitted=mu,
        weights=w,
        dispersion=1.0,
        design=design,
        resid=resid,
        resid_adj=resid_adj,
        wx=wx,
        xtwx_chol=chol,
    )


def score_test(fit: NullFit, g: np.ndarray) -> ScoreTestResult:
    """Score test of one genotype (or residual) vector against a null fit."""
    g = np.asarray(g, dtype=np.float64)
    design = fit.design
    if g.shape[0] != design.n:
        raise ValueError("genotype length does not match the null fit")

    u = float(g @ fit.resid_adj)
    if fit.kind == CONTINUOUS:
        qg = design.q.T @ g
        v = (float(g @ g) - float(qg @ qg)) * fit.dispersion
    else:
        d = fit.wx.T @ g
        quad = solve_triangular(fit.xtwx_chol, d, lower=True)
        v = float(g @ (fit.weights * g)) - float(quad @ quad)
    if v <= VARIANCE_FLOOR:
        raise DegenerateGenotype("genotype lies in the covariate span (v ~ 0)")

    z = u / np.sqrt(v)
    p_lower, p_upper, p_two = tail_pvalues(z)
    return ScoreTestResult(
        u=u, v=v, z=float(z),
        p_lower=float(p_lower), p_upper=float(p_upper), p_two=float(p_two),
    )


def batch_z_continuous(
    rows: np.ndarray, resid_adj: np.ndarray, dispersions: np.ndarray,
    row_resid_norm2: np.ndarray,
) -> np.ndarray:
    """z statistics for a block of genotype rows against continuous fits.

    ``rows`` is (b, n); ``resid_adj`` is (n, K) of cached trait residuals;
    ``row_resid_norm2`` is the per-row squared norm after projection onto
    the design (identical for every continuous trait).  Returns (b, K).
    """
    u = rows @ resid_adj
    v = np.outer(row_resid_norm2, dispersions)
    return u / np.sqrt(v)


def batch_z_binary(rows: np.ndarray, rows_sq: np.ndarray, fit: NullFit) -> np.ndarray:
    """z statistics for a block of genotype rows against one binary fit."""
    u = rows @ fit.resid_adj
    d = rows @ fit.wx
    quad = solve_triangular(fit.xtwx_chol, d.T, lower=True)
    v = rows_sq @ fit.weights - np.einsum("ij,ij->j", quad, quad)
    np.maximum(v, VARIANCE_FLOOR, out=v)
    return u / np.sqrt(v)
