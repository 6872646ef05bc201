import numpy as np
import pytest
from scipy import stats

import mtaf.engine as engine_mod
from mtaf.combine import af_operator
from mtaf.data import CovariateMatrix, GenotypeVector, TraitMatrix, validate_dataset
from mtaf.engine import (
    AdaptiveSchedule,
    TestOptions as Options,
    adaptive_scan,
    build_pvalue_matrices,
    combination_tree,
    method_pvalues,
    mtaf_single_snp,
    prepare_context,
)
from mtaf.errors import PermutationCountTooSmall
from mtaf.rng import PermutationPlan
from mtaf.score import fit_null, score_test


def _dataset(rng, n=200, k_cont=2, k_bin=0, n_snps=1, covariates=False, beta=0.0):
    snps = []
    for j in range(n_snps):
        g = rng.binomial(2, 0.3, size=n)
        if np.all(g == g[0]):
            g[0] = (g[0] + 1) % 3
        snps.append(GenotypeVector(f"rs{j}", g, chrom="1", pos=1000 + j))
    x = snps[0].values.astype(float)
    cov = None
    cov_term = 0.0
    if covariates:
        z = np.column_stack([
            (x * 0.7 + rng.standard_normal(n) > 0.4).astype(float),
            rng.standard_normal(n),
        ])
        cov = CovariateMatrix(["z1", "z2"], z)
        cov_term = z @ [0.8, 0.5]
    names, kinds, cols = [], [], []
    for j in range(k_cont):
        names.append(f"c{j}")
        kinds.append("continuous")
        cols.append(beta * x + cov_term + rng.standard_normal(n))
    for j in range(k_bin):
        names.append(f"b{j}")
        kinds.append("binary")
        logit = beta * x + cov_term + rng.standard_normal(n)
        cols.append((rng.random(n) < 1 / (1 + np.exp(-logit))).astype(float))
    traits = TraitMatrix(names=names, kinds=kinds, values=np.column_stack(cols))
    return validate_dataset(snps, traits, cov)


class TestBuildMatrices:
    def test_row_zero_is_observed_pvalue(self, rng):
        ds = _dataset(rng, k_cont=1)
        snp = ds.genotypes[0]
        branches = build_pvalue_matrices(ds, snp, 20, PermutationPlan(seed=1))
        mat = branches.continuous["two_sided"]
        assert mat.values.shape == (21, 1)
        # direct observed score test on the raw genotype
        fit = fit_null(ds.traits.column(0), "continuous", CovariateMatrix.empty(ds.n))
        observed = score_test(fit, snp.values.astype(float))
        assert mat.values[0, 0] == pytest.approx(observed.p_two, rel=1e-9)
        assert branches.continuous["lower"].values[0, 0] == pytest.approx(
            observed.p_lower, rel=1e-9
        )

    def test_too_few_permutations_rejected(self, rng):
        ds = _dataset(rng)
        with pytest.raises(PermutationCountTooSmall):
            build_pvalue_matrices(ds, ds.genotypes[0], 2, PermutationPlan(seed=1))

    def test_identity_permutations_reproduce_row_zero(self, rng, monkeypatch):
        monkeypatch.setattr(
            engine_mod,
            "permutation_block",
            lambda gen, count, n: np.tile(np.arange(n), (count, 1)),
        )
        ds = _dataset(rng, k_cont=2, k_bin=1, covariates=True)
        branches = build_pvalue_matrices(ds, ds.genotypes[0], 25, PermutationPlan(seed=1))
        for mats in (branches.continuous, branches.binary, branches.pca):
            for mat in mats.values():
                assert np.abs(mat.values - mat.values[0]).max() <= 1e-12

    def test_observed_row_matches_raw_genotype_z(self, rng):
        # row 0 uses e_x, but the score test is invariant to that substitution
        ds = _dataset(rng, k_cont=1, covariates=True)
        snp = ds.genotypes[0]
        ctx = prepare_context(ds)
        branches = build_pvalue_matrices(ds, snp, 30, PermutationPlan(seed=2), context=ctx)
        observed = score_test(ctx.fits[0], snp.values.astype(float))
        assert branches.continuous["two_sided"].values[0, 0] == pytest.approx(
            observed.p_two, rel=1e-9
        )

    def test_deterministic_given_plan(self, rng):
        ds = _dataset(rng, k_cont=2)
        a = build_pvalue_matrices(ds, ds.genotypes[0], 50, PermutationPlan(seed=3))
        b = build_pvalue_matrices(ds, ds.genotypes[0], 50, PermutationPlan(seed=3))
        np.testing.assert_array_equal(
            a.continuous["two_sided"].values, b.continuous["two_sided"].values
        )

    def test_null_columns_uniform(self, rng):
        ds = _dataset(rng, n=500, k_cont=3)
        branches = build_pvalue_matrices(
            ds, ds.genotypes[0], 1999, PermutationPlan(seed=4)
        )
        perm_rows = branches.continuous["two_sided"].values[1:]
        for j in range(perm_rows.shape[1]):
            assert stats.kstest(perm_rows[:, j], "uniform").pvalue > 0.01


class TestCombinationTree:
    def test_continuous_only_has_no_binary_branch(self, rng):
        ds = _dataset(rng, k_cont=3)
        rec = mtaf_single_snp(ds, ds.genotypes[0], 99, PermutationPlan(seed=5))
        assert "binary" not in rec.branch_pvalues
        assert {"continuous_original", "continuous_pca", "lower", "upper"} <= set(
            rec.branch_pvalues
        )

    def test_binary_only_has_no_pca(self, rng):
        ds = _dataset(rng, n=300, k_cont=0, k_bin=3)
        rec = mtaf_single_snp(ds, ds.genotypes[0], 99, PermutationPlan(seed=6))
        assert "continuous_pca" not in rec.branch_pvalues
        assert "continuous_original" not in rec.branch_pvalues
        assert "binary" in rec.branch_pvalues

    def test_single_branch_final_equals_branch(self, rng):
        ds = _dataset(rng, k_cont=2)
        options = Options(use_pca=False)
        branches = build_pvalue_matrices(
            ds, ds.genotypes[0], 60, PermutationPlan(seed=7), options=options
        )
        final, reported = combination_tree(branches, options)
        assert final.reported == reported["continuous_original"]

    def test_two_sided_mode_uses_two_sided_matrix(self, rng):
        ds = _dataset(rng, k_cont=2)
        options = Options(one_sided=False, use_pca=False)
        branches = build_pvalue_matrices(
            ds, ds.genotypes[0], 60, PermutationPlan(seed=8), options=options
        )
        final, reported = combination_tree(branches, options)
        expected = af_operator(branches.continuous["two_sided"])
        assert final.reported == expected.reported
        assert "lower" not in reported

    def test_method_pvalues_consistency(self, rng):
        ds = _dataset(rng, k_cont=2, k_bin=2, covariates=True, beta=0.3)
        out = method_pvalues(
            ds, ds.genotypes[0], 99, PermutationPlan(seed=9),
            ["MTAF", "MTAF_original", "MTAF_PCA", "minP"],
        )
        assert set(out) == {"MTAF", "MTAF_original", "MTAF_PCA", "minP"}
        for p in out.values():
            assert 1 / 100 <= p <= 1.0

    def test_mtaf_pca_requires_continuous(self, rng):
        ds = _dataset(rng, n=300, k_cont=0, k_bin=2)
        with pytest.raises(ValueError):
            method_pvalues(
                ds, ds.genotypes[0], 99, PermutationPlan(seed=10), ["MTAF_PCA"]
            )


class TestAdaptiveScan:
    def test_null_snps_mostly_drop_in_round_one(self, rng):
        ds = _dataset(rng, n=150, k_cont=2, n_snps=30)
        schedule = AdaptiveSchedule(b_init=100, growth=10, b_max=1000)
        records = adaptive_scan(ds, schedule, PermutationPlan(seed=11))
        assert [r.snp_id for r in records] == [g.snp_id for g in ds.genotypes]
        dropped = [r for r in records if r.status == "dropped_round_1"]
        assert len(dropped) >= 24  # ~95% expected
        for r in records:
            if r.status.startswith("dropped"):
                round_idx = int(r.status.rsplit("_", 1)[1])
                b_round = 100 * 10 ** (round_idx - 1)
                assert r.n_perm == b_round
                assert r.p_value > schedule.drop_coefficient / b_round

    def test_strong_snp_reaches_b_max(self, rng):
        ds = _dataset(rng, n=400, k_cont=3, beta=0.8)
        schedule = AdaptiveSchedule(b_init=50, growth=10, b_max=5000)
        records = adaptive_scan(ds, schedule, PermutationPlan(seed=12))
        assert records[0].status == "completed"
        assert records[0].n_perm == 5000
        assert records[0].p_value >= 1 / 5001

    def test_single_round_schedule_equals_fixed_b(self, rng):
        ds = _dataset(rng, n=150, k_cont=2, n_snps=3)
        schedule = AdaptiveSchedule(b_init=200, growth=10, b_max=200)
        records = adaptive_scan(ds, schedule, PermutationPlan(seed=13))
        for rec, snp in zip(records, ds.genotypes):
            fixed = mtaf_single_snp(ds, snp, 200, PermutationPlan(seed=13))
            assert rec.p_value == fixed.p_value
            assert rec.n_perm == 200
            assert rec.status == "completed"

    def test_scan_deterministic_across_thread_counts(self, rng):
        ds = _dataset(rng, n=150, k_cont=2, k_bin=1, n_snps=12, covariates=True)
        schedule = AdaptiveSchedule(b_init=50, growth=10, b_max=500)
        plan = PermutationPlan(seed=14)
        serial = adaptive_scan(ds, schedule, plan, threads=1)
        parallel = adaptive_scan(ds, schedule, plan, threads=4)
        assert serial == parallel

    def test_degenerate_snp_gets_status(self, rng):
        n = 150
        z = rng.binomial(1, 0.5, size=n).astype(float)
        cov = CovariateMatrix(["z"], z.reshape(-1, 1))
        good = rng.binomial(2, 0.3, size=n)
        traits = TraitMatrix(
            ["c0"], ["continuous"], rng.standard_normal((n, 1))
        )
        ds = validate_dataset(
            [GenotypeVector("rs_dup", z.astype(int)), GenotypeVector("rs_ok", good)],
            traits, cov,
        )
        records = adaptive_scan(
            ds, AdaptiveSchedule(b_init=50, b_max=50), PermutationPlan(seed=15)
        )
        assert records[0].status == "degenerate"
        assert records[0].p_value is None
        assert records[1].status in ("completed", "dropped_round_1")

    def test_monotone_refinement(self, rng):
        ds = _dataset(rng, n=300, k_cont=2, beta=0.15)
        plan = PermutationPlan(seed=16)
        p_small = mtaf_single_snp(ds, ds.genotypes[0], 1000, plan, round_index=1).p_value
        p_large = mtaf_single_snp(ds, ds.genotypes[0], 10_000, plan, round_index=2).p_value
        tol = 3 * np.sqrt(max(p_small, 1e-3) * (1 - p_small) / 1000)
        assert abs(p_large - p_small) <= tol
