"""Command-line interface: `mtaf test` and `mtaf simulate`."""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import sys
from pathlib import Path

from . import io as mtaf_io
from .data import validate_dataset
from .engine import AdaptiveSchedule, AssociationRecord, TestOptions, adaptive_scan
from .errors import AllSnpsConstant, MtafError
from .rng import PermutationPlan
from .simulate import SimulationScenario, run_study, table_scenarios

EXIT_USAGE = 2
EXIT_DEGENERATE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtaf",
        description="Multiple-trait adaptive Fisher association testing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    test = sub.add_parser("test", help="run the adaptive permutation scan on a dataset")
    test.add_argument("--geno", required=True, help="genotype CSV (subject_id,<snp>,...)")
    test.add_argument("--traits", required=True, help="trait CSV (subject_id,<trait>,...)")
    test.add_argument("--trait-types", required=True,
                      help="CSV of trait_name,continuous|binary lines")
    test.add_argument("--covar", help="covariate CSV (subject_id,<cov>,...)")
    test.add_argument("--out", required=True, help="output prefix")
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--threads", type=int, default=1)
    test.add_argument("--b-init", type=int, default=100)
    test.add_argument("--b-max", type=int, default=10_000_000)
    test.add_argument("--growth", type=int, default=10)
    test.add_argument("--drop-coef", type=float, default=5.0)
    test.add_argument("--alpha", type=float, default=0.05)
    side = test.add_mutually_exclusive_group()
    side.add_argument("--one-sided", dest="one_sided", action="store_true", default=True)
    side.add_argument("--two-sided", dest="one_sided", action="store_false")
    test.add_argument("--no-pca", dest="use_pca", action="store_false", default=True)
    test.add_argument("--pca-scale", action="store_true",
                      help="standardize trait residuals before PCA")

    sim = sub.add_parser("simulate", help="run type-I-error / power studies")
    grid = sim.add_mutually_exclusive_group(required=True)
    grid.add_argument("--table", type=int, choices=range(1, 9),
                      help="preset scenario grid 1..8")
    grid.add_argument("--config", help="scenario config file (one section per scenario)")
    sim.add_argument("--replicates", type=int, default=1000)
    sim.add_argument("--b", type=int, default=999, help="permutations per test")
    sim.add_argument("--methods", default="MTAF",
                     help="comma-separated: MTAF,MTAF_original,MTAF_PCA,minP")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--out", required=True, help="output CSV path")
    side = sim.add_mutually_exclusive_group()
    side.add_argument("--one-sided", dest="one_sided", action="store_true", default=True)
    side.add_argument("--two-sided", dest="one_sided", action="store_false")
    return parser


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"mtaf: error: {message}", file=sys.stderr)
    return code


def cmd_test(args) -> int:
    try:
        geno_ids, snps = mtaf_io.read_genotypes(args.geno)
        trait_ids, traits = mtaf_io.read_traits(args.traits, args.trait_types)
        covariates, cov_ids = None, None
        if args.covar:
            cov_ids, covariates = mtaf_io.read_covariates(args.covar)
        dataset = validate_dataset(
            snps, traits, covariates,
            genotype_ids=geno_ids, trait_ids=trait_ids, covariate_ids=cov_ids,
        )
    except AllSnpsConstant as exc:
        return _fail(str(exc), EXIT_DEGENERATE)
    except (mtaf_io.ParseError, MtafError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")

    for warning in dataset.warnings:
        print(f"mtaf: warning: {warning}", file=sys.stderr)

    schedule = AdaptiveSchedule(
        b_init=args.b_init, growth=args.growth,
        b_max=args.b_max, drop_coefficient=args.drop_coef,
    )
    options = TestOptions(one_sided=args.one_sided, use_pca=args.use_pca,
                          pca_scale=args.pca_scale)
    plan = PermutationPlan(seed=args.seed)
    try:
        records = adaptive_scan(dataset, schedule, plan, options, threads=args.threads)
    except MtafError as exc:  # e.g. separation in a null fit
        return _fail(f"{type(exc).__name__}: {exc}")

    # excluded (constant) SNPs still get a results row, in input order
    by_id = {rec.snp_id: rec for rec in records}
    all_records = []
    for snp in snps:
        if snp.snp_id in by_id:
            all_records.append(by_id[snp.snp_id])
        else:
            all_records.append(
                AssociationRecord(snp_id=snp.snp_id, chrom=snp.chrom, pos=snp.pos,
                                  p_value=None, n_perm=0, status="degenerate")
            )
    if all(rec.status == "degenerate" for rec in all_records):
        return _fail("every SNP is degenerate; nothing was tested", EXIT_DEGENERATE)

    out = Path(args.out)
    mtaf_io.write_results(out.with_suffix(out.suffix + ".results.csv"), all_records)
    mtaf_io.write_qq(out.with_suffix(out.suffix + ".qq.csv"), all_records)
    mtaf_io.write_manhattan(out.with_suffix(out.suffix + ".manhattan.csv"), all_records)
    n_sig = sum(
        1 for rec in all_records
        if rec.p_value is not None and rec.p_value <= args.alpha
    )
    print(
        f"mtaf: tested {sum(r.status != 'degenerate' for r in all_records)} SNPs; "
        f"{n_sig} at p <= {args.alpha:g}",
        file=sys.stderr,
    )
    return 0


def _scenarios_from_config(path: str) -> list[SimulationScenario]:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read or not parser.sections():
        raise ValueError(f"{path}: no scenario sections found")
    fields = {f.name: f.type for f in dataclasses.fields(SimulationScenario)}
    scenarios = []
    for section in parser.sections():
        kwargs = {"name": section}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ValueError(f"{path}: unknown scenario key {key!r} in [{section}]")
            if key in ("with_covariates", "naive_permutation"):
                kwargs[key] = parser.getboolean(section, key)
            elif key in ("n", "k", "replicates", "b_perm"):
                kwargs[key] = parser.getint(section, key)
            elif key in ("rho", "effect_low", "effect_high", "maf", "alpha"):
                kwargs[key] = parser.getfloat(section, key)
            else:
                kwargs[key] = raw
        scenarios.append(SimulationScenario(**kwargs))
    return scenarios


def cmd_simulate(args) -> int:
    if args.replicates < 1:
        return _fail("replicates must be >= 1")
    try:
        if args.table is not None:
            scenarios = table_scenarios(args.table, args.replicates, args.b)
        else:
            scenarios = _scenarios_from_config(args.config)
    except (ValueError, configparser.Error) as exc:
        return _fail(str(exc))
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        return _fail("no methods requested")
    options = TestOptions(one_sided=args.one_sided)
    reports = run_study(scenarios, methods, master_seed=args.seed,
                        options=options, threads=args.threads)
    mtaf_io.write_power_reports(args.out, reports)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "test":
        return cmd_test(args)
    return cmd_simulate(args)


if __name__ == "__main__":
    sys.exit(main())
