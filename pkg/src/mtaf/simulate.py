"""Synthetic data generation and type-I-error / power studies.

One scenario describes a cell of the study grid: trait count and kinds,
compound-symmetry correlation of the noise, signal sparsity, effect-size
bounds, and whether two genotype-confounded binary covariates are present.
Traits follow a linear model in the genotype (identity link for continuous
traits, logit link for binary ones) with multivariate Gaussian noise whose
variances are inverse-gamma distributed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .data import (
    BINARY,
    CONTINUOUS,
    CovariateMatrix,
    GenotypeVector,
    TraitMatrix,
    validate_dataset,
)
from .engine import TestOptions, method_pvalues
from .errors import MtafError
from .rng import PermutationPlan, keyed_generator, stable_digest

KIND_CONTINUOUS = "continuous"
KIND_BINARY = "binary"
KIND_MIXED = "mixed"

SPARSITY_NULL = "null"
SPARSITY_SPARSE = "sparse"
SPARSITY_DENSE = "dense"

INV_GAMMA_SHAPE = 4.0
INV_GAMMA_SCALE = 4.0
CONFOUNDER_COUNT = 2


@dataclass(frozen=True)
class SimulationScenario:
    name: str
    n: int = 1000
    k: int = 10
    kinds: str = KIND_CONTINUOUS
    rho: float = 0.3
    sparsity: str = SPARSITY_NULL
    effect_low: float = 0.0
    effect_high: float = 0.0
    maf: float = 0.3
    with_covariates: bool = False
    replicates: int = 1000
    b_perm: int = 999
    alpha: float = 0.05
    naive_permutation: bool = False  # test-only: ignore covariates in the analysis

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")
        if not 0.0 < self.maf < 0.5:
            raise ValueError("maf must be in (0, 0.5)")
        if self.effect_low > self.effect_high:
            raise ValueError("effect_low must be <= effect_high")
        if self.kinds not in (KIND_CONTINUOUS, KIND_BINARY, KIND_MIXED):
            raise ValueError(f"unknown kinds {self.kinds!r}")
        if self.sparsity not in (SPARSITY_NULL, SPARSITY_SPARSE, SPARSITY_DENSE):
            raise ValueError(f"unknown sparsity {self.sparsity!r}")

    def n_associated(self) -> int:
        if self.sparsity == SPARSITY_NULL:
            return 0
        if self.k == 10:
            return 1 if self.sparsity == SPARSITY_SPARSE else 4
        frac = 0.02 if self.sparsity == SPARSITY_SPARSE else 0.20
        return math.ceil(frac * self.k)

    def trait_kinds(self) -> list[str]:
        if self.kinds == KIND_CONTINUOUS:
            return [CONTINUOUS] * self.k
        if self.kinds == KIND_BINARY:
            return [BINARY] * self.k
        half = (self.k + 1) // 2
        return [CONTINUOUS] * half + [BINARY] * (self.k - half)


@dataclass(frozen=True)
class PowerReport:
    scenario: SimulationScenario
    method: str
    rejection_rate: float
    mc_stderr: float


def simulate_genotype(n: int, maf: float, rng: np.random.Generator) -> GenotypeVector:
    """i.i.d. Binomial(2, maf) minor-allele counts, resampled if constant."""
    if not 0.0 < maf < 0.5:
        raise ValueError("maf must be in (0, 0.5)")
    values = rng.binomial(2, maf, size=n)
    while np.all(values == values[0]):
        logging.getLogger(__name__).info(
            "constant genotype draw at n=%d maf=%.3f; resampling", n, maf
        )
        values = rng.binomial(2, maf, size=n)
    return GenotypeVector(snp_id="sim", values=values)


def simulate_covariance(k: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """CS-correlation covariance with Inv-Gamma(4, 4) variances."""
    if k < 2:
        raise ValueError("need at least two traits")
    variances = INV_GAMMA_SCALE / rng.gamma(INV_GAMMA_SHAPE, 1.0, size=k)
    sd = np.sqrt(variances)
    sigma = rho * np.outer(sd, sd)
    np.fill_diagonal(sigma, variances)
    return sigma


def _assigned_beta(scenario: SimulationScenario, rng: np.random.Generator) -> np.ndarray:
    """Effect vector with signals in the leading columns of each trait kind."""
    beta = np.zeros(scenario.k)
    a = scenario.n_associated()
    if a == 0:
        return beta
    effects = rng.uniform(scenario.effect_low, scenario.effect_high, size=a)
    kinds = scenario.trait_kinds()
    if scenario.kinds == KIND_MIXED:
        cont = [j for j, kk in enumerate(kinds) if kk == CONTINUOUS]
        binr = [j for j, kk in enumerate(kinds) if kk == BINARY]
        # split the signal evenly across the two kinds
        n_cont = min((a + 1) // 2, len(cont))
        positions = cont[:n_cont] + binr[: a - n_cont]
    else:
        positions = list(range(a))
    beta[positions] = effects
    return beta


def _confounders(
    x: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Two binary covariates dichotomized from genotype-loaded latents."""
    eta = rng.uniform(0.5, 1.0, size=CONFOUNDER_COUNT)
    omega = rng.standard_normal((len(x), CONFOUNDER_COUNT))
    latent = x[:, None] * eta + omega
    z = (latent > np.median(latent, axis=0)).astype(np.float64)
    return z, eta


def simulate_traits(
    x: GenotypeVector, scenario: SimulationScenario, rng: np.random.Generator
) -> tuple[TraitMatrix, CovariateMatrix | None, np.ndarray]:
    """Trait matrix (and covariates when configured) for one replicate."""
    n, k = x.n, scenario.k
    beta = _assigned_beta(scenario, rng)
    xf = x.values.astype(np.float64)

    covariates = None
    linear = np.outer(xf, beta)
    if scenario.with_covariates:
        z, _ = _confounders(xf, rng)
        gamma = rng.uniform(0.5, 1.0, size=(k, CONFOUNDER_COUNT))
        linear += z @ gamma.T
        covariates = CovariateMatrix(names=["z1", "z2"], values=z)

    sigma = simulate_covariance(k, scenario.rho, rng)
    chol = np.linalg.cholesky(sigma)
    linear += rng.standard_normal((n, k)) @ chol.T

    kinds = scenario.trait_kinds()
    values = linear
    bin_cols = [j for j, kk in enumerate(kinds) if kk == BINARY]
    if bin_cols:
        values = linear.copy()
        probs = expit(linear[:, bin_cols])
        values[:, bin_cols] = rng.random(probs.shape) < probs

    names = [f"t{j + 1}" for j in range(k)]
    return TraitMatrix(names=names, kinds=kinds, values=values), covariates, beta


def _replicate_pvalues(
    scenario: SimulationScenario,
    master_seed: int,
    rep: int,
    methods: list[str],
    options: TestOptions,
) -> dict[str, float]:
    """One replicate: simulate, test, return reported p per method."""
    rng = keyed_generator(master_seed, stable_digest(scenario.name), rep)
    for _ in range(100):
        x = simulate_genotype(scenario.n, scenario.maf, rng)
        traits, covariates, _ = simulate_traits(x, scenario, rng)
        if scenario.naive_permutation:
            covariates = None  # analyze as if no covariates existed
        try:
            dataset = validate_dataset([x], traits, covariates)
            break
        except MtafError:
            continue  # rare degenerate draw (e.g. constant binary trait)
    else:
        raise RuntimeError(f"could not draw a valid replicate for {scenario.name}")
    plan = PermutationPlan(seed=int(rng.integers(2**63)))
    usable = [m for m in methods if m != "MTAF_PCA" or scenario.kinds != KIND_BINARY]
    return method_pvalues(dataset, x, scenario.b_perm, plan, usable, options)


def _replicate_batch(args) -> list[dict[str, float]]:
    scenario, master_seed, reps, methods, options = args
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            return [
                _replicate_pvalues(scenario, master_seed, r, methods, options)
                for r in reps
            ]
    except ImportError:  # pragma: no cover
        return [
            _replicate_pvalues(scenario, master_seed, r, methods, options)
            for r in reps
        ]


def run_study(
    scenarios: list[SimulationScenario],
    methods: list[str],
    master_seed: int = 0,
    *,
    options: TestOptions = TestOptions(),
    threads: int = 1,
    batch_size: int = 20,
) -> list[PowerReport]:
    """Rejection rates per scenario and method.

    Every replicate's random stream is keyed by (master seed, scenario
    name, replicate index), so reports are reproducible bit-identically
    for any thread count.
    """
    reports = []
    for scenario in scenarios:
        if scenario.replicates < 1:
            raise ValueError("replicates must be >= 1")
        usable = [m for m in methods if m != "MTAF_PCA" or scenario.kinds != KIND_BINARY]
        batches = [
            (scenario, master_seed, list(range(lo, min(lo + batch_size, scenario.replicates))), usable, options)
            for lo in range(0, scenario.replicates, batch_size)
        ]
        if threads <= 1:
            results = [_replicate_batch(b) for b in batches]
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_replicate_batch, batches))
        pvals: dict[str, list[float]] = {m: [] for m in usable}
        for batch in results:
            for rep in batch:
                for m in usable:
                    pvals[m].append(rep[m])
        for m in usable:
            p = np.array(pvals[m])
            rate = float(np.mean(p <= scenario.alpha))
            stderr = math.sqrt(rate * (1.0 - rate) / scenario.replicates)
            reports.append(
                PowerReport(scenario=scenario, method=m, rejection_rate=rate, mc_stderr=stderr)
            )
    return reports


def _grid(name: str, base: SimulationScenario, **axes) -> list[SimulationScenario]:
    out = [base]
    for key, values in axes.items():
        out = [replace(s, **{key: v}) for s in out for v in values]
    return [
        replace(
            s,
            name=f"{name}_cov{int(s.with_covariates)}_rho{s.rho}_k{s.k}_{s.sparsity}",
        )
        for s in out
    ]


# Effect-size bounds per (sparsity, k) for each power table.
_EFFECTS_CONT_NOCOV = {
    (SPARSITY_SPARSE, 10): (0.15, 0.25), (SPARSITY_SPARSE, 50): (0.2, 0.4),
    (SPARSITY_SPARSE, 100): (0.15, 0.3), (SPARSITY_DENSE, 10): (0.05, 0.15),
    (SPARSITY_DENSE, 50): (0.05, 0.12), (SPARSITY_DENSE, 100): (0.02, 0.1),
}
_EFFECTS_CONT_COV = {
    (SPARSITY_SPARSE, 10): (0.15, 0.3), (SPARSITY_SPARSE, 50): (0.2, 0.4),
    (SPARSITY_SPARSE, 100): (0.15, 0.3), (SPARSITY_DENSE, 10): (0.05, 0.2),
    (SPARSITY_DENSE, 50): (0.05, 0.13), (SPARSITY_DENSE, 100): (0.03, 0.12),
}
_EFFECTS_BIN_NOCOV = {
    (SPARSITY_SPARSE, 10): (0.4, 0.6), (SPARSITY_SPARSE, 50): (0.6, 0.8),
    (SPARSITY_DENSE, 10): (0.2, 0.3), (SPARSITY_DENSE, 50): (0.15, 0.3),
}
_EFFECTS_BIN_COV = {
    (SPARSITY_SPARSE, 10): (0.4, 0.6), (SPARSITY_SPARSE, 50): (0.5, 0.7),
    (SPARSITY_DENSE, 10): (0.2, 0.3), (SPARSITY_DENSE, 50): (0.2, 0.35),
}
_EFFECTS_MIX_COV = {(SPARSITY_DENSE, 10): (0.05, 0.3), (SPARSITY_DENSE, 50): (0.05, 0.25)}


def _power_grid(name, kinds, with_cov, effects, ks, replicates, b_perm):
    out = []
    for sparsity in (SPARSITY_SPARSE, SPARSITY_DENSE):
        for rho in (0.3, 0.6):
            for k in ks:
                if (sparsity, k) not in effects:
                    continue
                lo, hi = effects[(sparsity, k)]
                out.append(
                    SimulationScenario(
                        name=f"{name}_{sparsity}_rho{rho}_k{k}",
                        k=k, kinds=kinds, rho=rho, sparsity=sparsity,
                        effect_low=lo, effect_high=hi,
                        with_covariates=with_cov,
                        replicates=replicates, b_perm=b_perm,
                    )
                )
    return out


def table_scenarios(table: int, replicates: int, b_perm: int = 999) -> list[SimulationScenario]:
    """Preset scenario grids for the eight study tables (1-3 type I, 4-8 power)."""
    base = SimulationScenario(name="base", replicates=replicates, b_perm=b_perm)
    if table == 1:
        return _grid(
            "t1_cont_null", replace(base, kinds=KIND_CONTINUOUS),
            with_covariates=[False, True], rho=[0.3, 0.6], k=[10, 50, 100],
        )
    if table == 2:
        return _grid(
            "t2_bin_null", replace(base, kinds=KIND_BINARY),
            with_covariates=[False, True], rho=[0.3, 0.6], k=[10, 50],
        )
    if table == 3:
        return _grid(
            "t3_mix_null", replace(base, kinds=KIND_MIXED, with_covariates=True),
            rho=[0.3, 0.6], k=[10, 50],
        )
    if table == 4:
        return _power_grid("t4_cont", KIND_CONTINUOUS, False, _EFFECTS_CONT_NOCOV,
                           [10, 50, 100], replicates, b_perm)
    if table == 5:
        return _power_grid("t5_cont", KIND_CONTINUOUS, True, _EFFECTS_CONT_COV,
                           [10, 50, 100], replicates, b_perm)
    if table == 6:
        return _power_grid("t6_bin", KIND_BINARY, False, _EFFECTS_BIN_NOCOV,
                           [10, 50], replicates, b_perm)
    if table == 7:
        return _power_grid("t7_bin", KIND_BINARY, True, _EFFECTS_BIN_COV,
                           [10, 50], replicates, b_perm)
    if table == 8:
        return _power_grid("t8_mix", KIND_MIXED, True, _EFFECTS_MIX_COV,
                           [10, 50], replicates, b_perm)
    raise ValueError(f"unknown table {table}; expected 1..8")
