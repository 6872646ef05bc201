"""Per-SNP test orchestration and the multi-round adaptive permutation scan.

The expensive inner loop is organized so each permutation row costs a few
dot products: null fits are cached per trait (they do not depend on the
genotype), the genotype residual e_x is computed once per SNP, and blocks
of permuted rows are pushed through the score tests as matrix products.
Row 0 of every p-value matrix is the unpermuted e_x, which yields the same
z as the raw genotype because the score statistic only sees (I - H) g.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .combine import (
    AFResult,
    PValueMatrix,
    TAIL_LOWER,
    TAIL_TWO_SIDED,
    TAIL_UPPER,
    af_operator,
    combine_continuous,
    combine_mixed,
    merge_af,
    minp_operator,
)
from .data import BINARY, CONTINUOUS, GenotypeVector, ValidatedDataset
from .errors import DegenerateGenotype, PermutationCountTooSmall
from .pca import PCScores, principal_components
from .residualize import CovariateDesign, genotype_residuals, trait_residuals
from .rng import PERM_CHUNK, PermutationPlan, permutation_block
from .score import (
    NullFit,
    batch_z_binary,
    batch_z_continuous,
    fit_null,
    tail_pvalues,
)

MIN_PERMUTATIONS = 20

METHOD_MTAF = "MTAF"
METHOD_ORIGINAL = "MTAF_original"
METHOD_PCA = "MTAF_PCA"
METHOD_MINP = "minP"


@dataclass(frozen=True)
class TestOptions:
    one_sided: bool = True
    use_pca: bool = True
    pca_scale: bool = False


@dataclass(frozen=True)
class AdaptiveSchedule:
    """Geometric escalation: round r uses b_init * growth**(r-1) permutations,
    and a SNP is finalized once its p-value exceeds drop_coefficient / B."""

    b_init: int = 100
    growth: int = 10
    b_max: int = 10_000_000
    drop_coefficient: float = 5.0

    def __post_init__(self):
        if self.b_init < MIN_PERMUTATIONS:
            raise ValueError(f"b_init must be >= {MIN_PERMUTATIONS}")
        if self.growth < 2:
            raise ValueError("growth must be >= 2")
        if self.b_max < self.b_init:
            raise ValueError("b_max must be >= b_init")


@dataclass(frozen=True)
class AssociationRecord:
    snp_id: str
    chrom: str | None
    pos: int | None
    p_value: float | None
    n_perm: int
    branch_pvalues: dict = field(default_factory=dict)
    status: str = "completed"


@dataclass
class DatasetContext:
    """Genotype-independent caches shared by every SNP and permutation."""

    design: CovariateDesign
    fits: list[NullFit]
    cont_idx: list[int]
    bin_idx: list[int]
    cont_resid: np.ndarray | None      # n x K_c stacked adjusted residuals
    cont_disp: np.ndarray | None       # K_c dispersions
    bin_fits: list[NullFit]
    pc: PCScores | None
    pc_scores: np.ndarray | None       # n x K_pc nonzero-variance score columns
    pc_disp: np.ndarray | None         # K_pc intercept-only dispersions


def prepare_context(
    dataset: ValidatedDataset, options: TestOptions = TestOptions()
) -> DatasetContext:
    design = CovariateDesign(dataset.covariates)
    fits = [
        fit_null(dataset.traits.column(j), kind, design)
        for j, kind in enumerate(dataset.traits.kinds)
    ]
    cont_idx = dataset.traits.indices_of(CONTINUOUS)
    bin_idx = dataset.traits.indices_of(BINARY)

    cont_resid = cont_disp = None
    if cont_idx:
        cont_resid = np.column_stack([fits[j].resid_adj for j in cont_idx])
        cont_disp = np.array([fits[j].dispersion for j in cont_idx])

    pc = pc_scores = pc_disp = None
    if options.use_pca and cont_idx:
        pc = principal_components(
            trait_residuals(dataset.traits, design), scale=options.pca_scale
        )
        keep = pc.explained_variance > 0
        if np.any(keep):
            pc_scores = np.ascontiguousarray(pc.scores[:, keep])
            # intercept-only null fit on a centered score column: the
            # dispersion is exactly the column's explained variance
            pc_disp = pc.explained_variance[keep]
        else:
            pc = None

    return DatasetContext(
        design=design,
        fits=fits,
        cont_idx=cont_idx,
        bin_idx=bin_idx,
        cont_resid=cont_resid,
        cont_disp=cont_disp,
        bin_fits=[fits[j] for j in bin_idx],
        pc=pc,
        pc_scores=pc_scores,
        pc_disp=pc_disp,
    )


@dataclass
class BranchMatrices:
    """Per-branch {lower, upper, two_sided} p-value matrices."""

    binary: dict[str, PValueMatrix] | None
    continuous: dict[str, PValueMatrix] | None
    pca: dict[str, PValueMatrix] | None


def _tail_matrices(z: np.ndarray) -> dict[str, PValueMatrix]:
    lower, upper, two = tail_pvalues(z)
    return {
        TAIL_LOWER: PValueMatrix(lower, tail=TAIL_LOWER),
        TAIL_UPPER: PValueMatrix(upper, tail=TAIL_UPPER),
        TAIL_TWO_SIDED: PValueMatrix(two, tail=TAIL_TWO_SIDED),
    }


def build_pvalue_matrices(
    dataset: ValidatedDataset,
    snp: GenotypeVector,
    b: int,
    plan: PermutationPlan,
    *,
    options: TestOptions = TestOptions(),
    round_index: int = 1,
    context: DatasetContext | None = None,
) -> BranchMatrices:
    """Score-test p-value matrices for the observed row plus b permutations.

    Row 0 is the unpermuted genotype residual; rows 1..b are drawn from the
    plan's (seed, snp, round) stream.  Raises PermutationCountTooSmall for
    b < 20 and DegenerateGenotype when e_x has no variance.
    """
    if b < MIN_PERMUTATIONS:
        raise PermutationCountTooSmall(f"b={b} is below the minimum {MIN_PERMUTATIONS}")
    ctx = context if context is not None else prepare_context(dataset, options)
    n = dataset.n
    e = genotype_residuals(snp, ctx.design).values
    norm2 = float(e @ e)

    rows_total = b + 1
    k_c = len(ctx.cont_idx)
    k_b = len(ctx.bin_idx)
    k_p = ctx.pc_scores.shape[1] if ctx.pc_scores is not None else 0
    z_cont = np.empty((rows_total, k_c)) if k_c else None
    z_bin = np.empty((rows_total, k_b)) if k_b else None
    z_pca = np.empty((rows_total, k_p)) if k_p else None

    stream = plan.stream(snp.snp_id, round_index)
    start = 0
    while start < rows_total:
        count = min(PERM_CHUNK, rows_total - start)
        if start == 0:
            idx = permutation_block(stream, count - 1, n)
            rows = np.vstack([e[None, :], e[idx]])
        else:
            idx = permutation_block(stream, count, n)
            rows = e[idx]
        sl = slice(start, start + count)

        qg = rows @ ctx.design.q
        rn2 = norm2 - np.einsum("ij,ij->i", qg, qg)
        np.maximum(rn2, 0.0, out=rn2)
        if start == 0 and rn2[0] <= 1e-12:
            raise DegenerateGenotype(
                f"SNP {snp.snp_id}: projected genotype variance is zero"
            )
        np.maximum(rn2, 1e-12, out=rn2)

        if k_c:
            z_cont[sl] = batch_z_continuous(rows, ctx.cont_resid, ctx.cont_disp, rn2)
        if k_p:
            rowsum = rows.sum(axis=1)
            rn2_int = np.maximum(norm2 - rowsum**2 / n, 1e-12)
            z_pca[sl] = (rows @ ctx.pc_scores) / np.sqrt(
                np.outer(rn2_int, ctx.pc_disp)
            )
        if k_b:
            rows_sq = rows**2
            for j, fit in enumerate(ctx.bin_fits):
                z_bin[sl, j] = batch_z_binary(rows, rows_sq, fit)
        start += count

    return BranchMatrices(
        binary=_tail_matrices(z_bin) if k_b else None,
        continuous=_tail_matrices(z_cont) if k_c else None,
        pca=_tail_matrices(z_pca) if k_p else None,
    )


def _branch_af(mats: dict[str, PValueMatrix], one_sided: bool):
    """AF result of one branch, plus its per-tail leaves when one-sided."""
    if not one_sided:
        return af_operator(mats[TAIL_TWO_SIDED]), None, None
    lo = af_operator(mats[TAIL_LOWER])
    up = af_operator(mats[TAIL_UPPER])
    return merge_af(lo, up), lo, up


def combination_tree(
    branches: BranchMatrices, options: TestOptions
) -> tuple[AFResult, dict[str, float]]:
    """Assemble the final AF result and the reported branch p-values."""
    reported: dict[str, float] = {}
    p_binary = p_orig = p_pca = None
    lo = up = None

    if branches.binary is not None:
        p_binary, b_lo, b_up = _branch_af(branches.binary, options.one_sided)
        reported["binary"] = p_binary.reported
        lo, up = b_lo, b_up
    if branches.continuous is not None:
        p_orig, c_lo, c_up = _branch_af(branches.continuous, options.one_sided)
        reported["continuous_original"] = p_orig.reported
        lo, up = c_lo, c_up  # continuous tails take precedence in the record
    if branches.pca is not None:
        p_pca, _, _ = _branch_af(branches.pca, options.one_sided)
        reported["continuous_pca"] = p_pca.reported

    if lo is not None:
        reported["lower"] = lo.reported
        reported["upper"] = up.reported

    if p_orig is not None and p_pca is not None:
        if options.one_sided:
            p_continuous = merge_af(p_orig, p_pca)
        else:
            p_continuous = combine_continuous(
                branches.continuous[TAIL_TWO_SIDED], branches.pca[TAIL_TWO_SIDED]
            )
    else:
        p_continuous = p_orig

    if p_binary is not None and p_continuous is not None:
        final = combine_mixed(p_binary, p_continuous)
    else:
        final = p_binary if p_binary is not None else p_continuous
    if final is None:
        raise ValueError("no trait branches were built")
    return final, reported


def mtaf_single_snp(
    dataset: ValidatedDataset,
    snp: GenotypeVector,
    b: int,
    plan: PermutationPlan,
    options: TestOptions = TestOptions(),
    *,
    round_index: int = 1,
    context: DatasetContext | None = None,
) -> AssociationRecord:
    """Full combination-tree test of one SNP with b permutations."""
    branches = build_pvalue_matrices(
        dataset, snp, b, plan, options=options, round_index=round_index, context=context
    )
    final, reported = combination_tree(branches, options)
    return AssociationRecord(
        snp_id=snp.snp_id,
        chrom=snp.chrom,
        pos=snp.pos,
        p_value=final.reported,
        n_perm=b,
        branch_pvalues=reported,
        status="completed",
    )


def method_pvalues(
    dataset: ValidatedDataset,
    snp: GenotypeVector,
    b: int,
    plan: PermutationPlan,
    methods: list[str],
    options: TestOptions = TestOptions(),
    *,
    context: DatasetContext | None = None,
) -> dict[str, float]:
    """Reported p-value per requested method, from one permutation set."""
    ctx = context if context is not None else prepare_context(dataset, options)
    branches = build_pvalue_matrices(dataset, snp, b, plan, options=options, context=ctx)
    out: dict[str, float] = {}
    for method in methods:
        if method == METHOD_MTAF:
            final, _ = combination_tree(branches, options)
            out[method] = final.reported
        elif method == METHOD_ORIGINAL:
            pruned = BranchMatrices(
                binary=branches.binary, continuous=branches.continuous, pca=None
            )
            final, _ = combination_tree(pruned, options)
            out[method] = final.reported
        elif method == METHOD_PCA:
            if branches.pca is None:
                raise ValueError("MTAF_PCA needs continuous traits")
            result, _, _ = _branch_af(branches.pca, options.one_sided)
            out[method] = result.reported
        elif method == METHOD_MINP:
            # conventional baseline: two-sided per-trait p-values
            cols = []
            if branches.binary is not None:
                cols.append(branches.binary[TAIL_TWO_SIDED].values)
            if branches.continuous is not None:
                cols.append(branches.continuous[TAIL_TWO_SIDED].values)
            out[method] = minp_operator(np.hstack(cols)).reported
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


def _scan_snp(
    dataset: ValidatedDataset,
    snp: GenotypeVector,
    schedule: AdaptiveSchedule,
    plan: PermutationPlan,
    options: TestOptions,
    context: DatasetContext,
) -> AssociationRecord:
    try:
        round_index = 1
        b = schedule.b_init
        while True:
            record = mtaf_single_snp(
                dataset, snp, b, plan, options,
                round_index=round_index, context=context,
            )
            if b >= schedule.b_max:
                return record
            if record.p_value > schedule.drop_coefficient / b:
                return dataclasses.replace(record, status=f"dropped_round_{round_index}")
            round_index += 1
            b = min(b * schedule.growth, schedule.b_max)
    except DegenerateGenotype:
        return AssociationRecord(
            snp_id=snp.snp_id, chrom=snp.chrom, pos=snp.pos,
            p_value=None, n_perm=0, status="degenerate",
        )


def adaptive_scan(
    dataset: ValidatedDataset,
    schedule: AdaptiveSchedule,
    plan: PermutationPlan,
    options: TestOptions = TestOptions(),
    *,
    threads: int = 1,
) -> list[AssociationRecord]:
    """Run the multi-round scan over every SNP in the dataset.

    Records come back in input SNP order and are bit-identical for any
    thread count: each SNP's work is a pure function of (seed, snp,
    schedule, options), and BLAS pools are pinned to one thread so worker
    parallelism is the only concurrency.
    """
    context = prepare_context(dataset, options)
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [
                _scan_snp(dataset, snp, schedule, plan, options, context)
                for snp in dataset.genotypes
            ]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_scan_snp, dataset, snp, schedule, plan, options, context)
                for snp in dataset.genotypes
            ]
            return [f.result() for f in futures]
