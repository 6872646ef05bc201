"""Core domain types and dataset validation.

A dataset is three row-aligned components: genotype vectors (one per SNP,
additively coded 0/1/2), an n-by-K trait matrix with per-column kind flags,
and an optional n-by-M covariate matrix.  ``validate_dataset`` aligns the
components by subject id, enforces the coding invariants, and drops
constant SNPs with a warning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllSnpsConstant,
    DimensionMismatch,
    NonBinaryCoding,
    RankDeficientCovariates,
)

CONTINUOUS = "continuous"
BINARY = "binary"


@dataclass(frozen=True)
class GenotypeVector:
    """One SNP's minor-allele counts across subjects."""

    snp_id: str
    values: np.ndarray
    chrom: str | None = None
    pos: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.int8))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))


@dataclass(frozen=True)
class TraitMatrix:
    """n-by-K phenotype matrix with per-column continuous/binary flags."""

    names: list[str]
    kinds: list[str]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.ascontiguousarray(self.values, dtype=np.float64)
        )
        if self.values.ndim != 2:
            raise DimensionMismatch("trait values must be a 2-d matrix")
        if len(self.names) != self.values.shape[1] or len(self.kinds) != len(self.names):
            raise DimensionMismatch("trait names/kinds do not match column count")
        for kind in self.kinds:
            if kind not in (CONTINUOUS, BINARY):
                raise ValueError(f"unknown trait kind {kind!r}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def indices_of(self, kind: str) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == kind]


@dataclass(frozen=True)
class CovariateMatrix:
    """n-by-M numeric covariates; an intercept column is always implied."""

    names: list[str]
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        object.__setattr__(self, "values", vals)
        if len(self.names) != self.values.shape[1]:
            raise DimensionMismatch("covariate names do not match column count")

    @classmethod
    def empty(cls, n: int) -> "CovariateMatrix":
        return cls(names=[], values=np.empty((n, 0)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def augmented(self) -> np.ndarray:
        """[intercept | Z], the design every null model is fit against."""
        return np.column_stack([np.ones(self.n), self.values])


@dataclass(frozen=True)
class ValidatedDataset:
    genotypes: list[GenotypeVector]
    traits: TraitMatrix
    covariates: CovariateMatrix
    n: int
    warnings: list[str] = field(default_factory=list)
    excluded_snps: list[str] = field(default_factory=list)


def _align(order: list, ids: list, label: str) -> np.ndarray:
    lookup = {s: i for i, s in enumerate(ids)}
    if len(lookup) != len(ids):
        raise DimensionMismatch(f"duplicate subject ids in {label}")
    try:
        return np.array([lookup[s] for s in order])
    except KeyError as exc:
        raise DimensionMismatch(
            f"subject id {exc.args[0]!r} missing from {label}"
        ) from None


def validate_dataset(
    genotypes: list[GenotypeVector],
    traits: TraitMatrix,
    covariates: CovariateMatrix | None = None,
    *,
    genotype_ids: list | None = None,
    trait_ids: list | None = None,
    covariate_ids: list | None = None,
) -> ValidatedDataset:
    """Align, check, and freeze the three dataset components.

    When subject-id lists are supplied, the trait and covariate rows are
    reordered to the genotype table's id order; otherwise all components
    must already be row-aligned.  Constant SNPs are excluded (listed in
    ``warnings``), binary traits must be coded {0, 1}, and [1 | Z] must be
    full column rank.
    """
    if not genotypes:
        raise DimensionMismatch("no genotype vectors supplied")
    n = genotypes[0].n
    if covariates is None:
        covariates = CovariateMatrix.empty(
            traits.n if trait_ids is None else len(trait_ids)
        )

    if genotype_ids is not None:
        if len(genotype_ids) != n:
            raise DimensionMismatch("genotype ids do not match genotype rows")
        if trait_ids is None or (covariates.m > 0 and covariate_ids is None):
            raise DimensionMismatch("subject ids must be given for every component")
        if set(genotype_ids) != set(trait_ids):
            raise DimensionMismatch("genotype and trait subject ids differ")
        t_order = _align(genotype_ids, trait_ids, "trait table")
        traits = TraitMatrix(traits.names, traits.kinds, traits.values[t_order])
        if covariates.m > 0:
            if set(genotype_ids) != set(covariate_ids):
                raise DimensionMismatch("genotype and covariate subject ids differ")
            c_order = _align(genotype_ids, covariate_ids, "covariate table")
            covariates = CovariateMatrix(covariates.names, covariates.values[c_order])
        else:
            covariates = CovariateMatrix.empty(n)

    for g in genotypes:
        if g.n != n:
            raise DimensionMismatch(
                f"SNP {g.snp_id}: {g.n} subjects, expected {n}"
            )
        bad = ~np.isin(g.values, (0, 1, 2))
        if np.any(bad):
            raise NonBinaryCoding(
                f"SNP {g.snp_id}: genotype value {g.values[bad][0]} not in {{0,1,2}}"
            )
    if traits.n != n or covariates.n != n:
        raise DimensionMismatch(
            f"row counts differ: genotypes {n}, traits {traits.n}, "
            f"covariates {covariates.n}"
        )
    if not np.all(np.isfinite(traits.values)):
        raise NonBinaryCoding("trait matrix contains non-finite values")
    if covariates.m and not np.all(np.isfinite(covariates.values)):
        raise NonBinaryCoding("covariate matrix contains non-finite values")

    for j, kind in enumerate(traits.kinds):
        col = traits.values[:, j]
        if kind == BINARY:
            if not np.all(np.isin(col, (0.0, 1.0))):
                bad = col[~np.isin(col, (0.0, 1.0))][0]
                raise NonBinaryCoding(
                    f"binary trait {traits.names[j]!r} contains value {bad}"
                )
            if col.min() == col.max():
                raise NonBinaryCoding(
                    f"binary trait {traits.names[j]!r} is constant"
                )
        else:
            if np.var(col) <= 0:
                raise DimensionMismatch(
                    f"continuous trait {traits.names[j]!r} has zero variance"
                )

    design = covariates.augmented()
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise RankDeficientCovariates(
            "[1 | Z] is rank deficient; drop collinear covariate columns"
        )
    if n < traits.k + covariates.m + 2:
        raise DimensionMismatch(
            f"n={n} leaves too few residual degrees of freedom for "
            f"K={traits.k} traits and M={covariates.m} covariates"
        )

    kept, warnings, excluded = [], [], []
    for g in genotypes:
        if g.is_constant():
            warnings.append(f"SNP {g.snp_id} is constant across subjects; excluded")
            excluded.append(g.snp_id)
        else:
            kept.append(g)
    if not kept:
        raise AllSnpsConstant("all SNPs are constant across subjects")

    return ValidatedDataset(
        genotypes=kept,
        traits=traits,
        covariates=covariates,
        n=n,
        warnings=warnings,
        excluded_snps=excluded,
    )
