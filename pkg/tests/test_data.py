import numpy as np
import pytest

from mtaf.data import (
    CovariateMatrix,
    GenotypeVector,
    TraitMatrix,
    validate_dataset,
)
from mtaf.errors import (
    AllSnpsConstant,
    DimensionMismatch,
    NonBinaryCoding,
    RankDeficientCovariates,
)


def _toy(n=40, rng=None, snps=3):
    rng = rng or np.random.default_rng(0)
    genos = [
        GenotypeVector(f"rs{j}", rng.binomial(2, 0.3, size=n)) for j in range(snps)
    ]
    traits = TraitMatrix(
        names=["bmi", "case"],
        kinds=["continuous", "binary"],
        values=np.column_stack(
            [rng.standard_normal(n), rng.integers(0, 2, size=n).astype(float)]
        ),
    )
    covs = CovariateMatrix(names=["age"], values=rng.standard_normal((n, 1)))
    return genos, traits, covs


def test_aligned_inputs_pass_through():
    genos, traits, covs = _toy(n=50)
    ds = validate_dataset(genos, traits, covs)
    assert ds.n == 50
    assert len(ds.genotypes) == 3
    assert ds.warnings == []


def test_constant_snp_excluded_with_warning():
    genos, traits, covs = _toy()
    genos.append(GenotypeVector("rs_const", np.ones(40, dtype=int)))
    ds = validate_dataset(genos, traits, covs)
    assert "rs_const" in ds.excluded_snps
    assert any("rs_const" in w for w in ds.warnings)
    assert [g.snp_id for g in ds.genotypes] == ["rs0", "rs1", "rs2"]


def test_all_constant_raises():
    _, traits, covs = _toy()
    genos = [GenotypeVector("rs0", np.full(40, 2))]
    with pytest.raises(AllSnpsConstant):
        validate_dataset(genos, traits, covs)


def test_binary_trait_with_2_rejected():
    genos, traits, covs = _toy()
    bad = traits.values.copy()
    bad[0, 1] = 2.0
    with pytest.raises(NonBinaryCoding):
        validate_dataset(genos, TraitMatrix(traits.names, traits.kinds, bad), covs)


def test_row_count_mismatch():
    genos, traits, covs = _toy()
    short = CovariateMatrix(names=["age"], values=covs.values[:-1])
    with pytest.raises(DimensionMismatch):
        validate_dataset(genos, traits, short)


def test_collinear_covariates_rejected():
    genos, traits, _ = _toy()
    z = np.random.default_rng(1).standard_normal(40)
    covs = CovariateMatrix(names=["a", "b"], values=np.column_stack([z, 2 * z]))
    with pytest.raises(RankDeficientCovariates):
        validate_dataset(genos, traits, covs)


def test_subject_id_alignment():
    genos, traits, covs = _toy(n=30)
    ids = [f"s{i}" for i in range(30)]
    shuffled = list(reversed(range(30)))
    ds = validate_dataset(
        genos,
        TraitMatrix(traits.names, traits.kinds, traits.values[shuffled]),
        CovariateMatrix(covs.names, covs.values[shuffled]),
        genotype_ids=ids,
        trait_ids=[ids[i] for i in shuffled],
        covariate_ids=[ids[i] for i in shuffled],
    )
    np.testing.assert_array_equal(ds.traits.values, traits.values)
    np.testing.assert_array_equal(ds.covariates.values, covs.values)


def test_id_set_mismatch():
    genos, traits, covs = _toy(n=30)
    ids = [f"s{i}" for i in range(30)]
    other = ids[:-1] + ["stranger"]
    with pytest.raises(DimensionMismatch):
        validate_dataset(
            genos, traits, covs,
            genotype_ids=ids, trait_ids=other, covariate_ids=ids,
        )


def test_validation_is_idempotent():
    genos, traits, covs = _toy()
    ds = validate_dataset(genos, traits, covs)
    again = validate_dataset(ds.genotypes, ds.traits, ds.covariates)
    assert again.n == ds.n
    assert [g.snp_id for g in again.genotypes] == [g.snp_id for g in ds.genotypes]
    np.testing.assert_array_equal(again.traits.values, ds.traits.values)
    np.testing.assert_array_equal(again.covariates.values, ds.covariates.values)


def test_too_few_subjects_for_traits():
    rng = np.random.default_rng(2)
    n, k = 10, 9
    genos = [GenotypeVector("rs0", rng.binomial(2, 0.3, size=n))]
    traits = TraitMatrix(
        names=[f"t{j}" for j in range(k)],
        kinds=["continuous"] * k,
        values=rng.standard_normal((n, k)),
    )
    with pytest.raises(DimensionMismatch):
        validate_dataset(genos, traits, None)


def test_subject_reordering_leaves_observed_statistics_unchanged():
    # every statistic is a sum over subjects, so a uniform reorder of all
    # components must reproduce the observed score tests exactly
    from mtaf.residualize import CovariateDesign
    from mtaf.score import fit_null, score_test

    rng = np.random.default_rng(7)
    genos, traits, covs = _toy(n=80, rng=rng)
    perm = rng.permutation(80)
    design_a = CovariateDesign(covs)
    design_b = CovariateDesign(CovariateMatrix(covs.names, covs.values[perm]))
    for j, kind in enumerate(traits.kinds):
        fit_a = fit_null(traits.values[:, j], kind, design_a)
        fit_b = fit_null(traits.values[perm, j], kind, design_b)
        res_a = score_test(fit_a, genos[0].values.astype(float))
        res_b = score_test(fit_b, genos[0].values[perm].astype(float))
        assert res_a.z == pytest.approx(res_b.z, abs=1e-10)
        assert res_a.p_two == pytest.approx(res_b.p_two, abs=1e-12)
