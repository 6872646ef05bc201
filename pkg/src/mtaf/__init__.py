"""Multiple-trait adaptive Fisher (MTAF) association testing.

Score tests per trait, adaptive Fisher combination across traits, and
residual-permutation inference with covariate adjustment, plus a
simulation workbench for calibration and power studies.
"""

from .combine import (
    AFResult,
    PValueMatrix,
    af_operator,
    combine_continuous,
    combine_mixed,
    combine_one_sided,
    merge_af,
    minp_operator,
)
from .data import (
    CovariateMatrix,
    GenotypeVector,
    TraitMatrix,
    ValidatedDataset,
    validate_dataset,
)
from .engine import (
    AdaptiveSchedule,
    AssociationRecord,
    TestOptions,
    adaptive_scan,
    build_pvalue_matrices,
    method_pvalues,
    mtaf_single_snp,
)
from .pca import PCScores, principal_components
from .residualize import CovariateDesign, ResidualVector, genotype_residuals, trait_residuals
from .rng import PermutationPlan
from .score import NullFit, ScoreTestResult, fit_null, score_test
from .simulate import (
    PowerReport,
    SimulationScenario,
    run_study,
    simulate_covariance,
    simulate_genotype,
    simulate_traits,
    table_scenarios,
)

__version__ = "0.1.0"

__all__ = [
    "AFResult",
    "AdaptiveSchedule",
    "AssociationRecord",
    "CovariateDesign",
    "CovariateMatrix",
    "GenotypeVector",
    "NullFit",
    "PCScores",
    "PValueMatrix",
    "PermutationPlan",
    "PowerReport",
    "ResidualVector",
    "ScoreTestResult",
    "SimulationScenario",
    "TestOptions",
    "TraitMatrix",
    "ValidatedDataset",
    "adaptive_scan",
    "af_operator",
    "build_pvalue_matrices",
    "combine_continuous",
    "combine_mixed",
    "combine_one_sided",
    "fit_null",
    "genotype_residuals",
    "merge_af",
    "method_pvalues",
    "minp_operator",
    "mtaf_single_snp",
    "principal_components",
    "run_study",
    "score_test",
    "simulate_covariance",
    "simulate_genotype",
    "simulate_traits",
    "table_scenarios",
    "trait_residuals",
    "validate_dataset",
]
