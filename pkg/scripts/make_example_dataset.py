#!/usr/bin/env python3
"""Emit a synthetic dataset in the CLI's file formats.

Writes <prefix>.geno.csv / .geno.map / .traits.csv / .trait_types.csv /
.covar.csv so the association scan can be tried end to end:

    python scripts/make_example_dataset.py --out demo --snps 200 --signal-snps 2
    mtaf test --geno demo.geno.csv --traits demo.traits.csv \
        --trait-types demo.trait_types.csv --covar demo.covar.csv \
        --out demo --b-max 100000
"""

import argparse
import csv

import numpy as np

from mtaf.rng import keyed_generator
from mtaf.simulate import SimulationScenario, simulate_genotype, simulate_traits


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output file prefix")
    parser.add_argument("--subjects", type=int, default=1000)
    parser.add_argument("--snps", type=int, default=100)
    parser.add_argument("--signal-snps", type=int, default=1,
                        help="leading SNPs given a real effect on the traits")
    parser.add_argument("--traits", type=int, default=10)
    parser.add_argument("--kinds", choices=["continuous", "binary", "mixed"],
                        default="mixed")
    parser.add_argument("--rho", type=float, default=0.4)
    parser.add_argument("--effect", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = keyed_generator(args.seed)
    scen = SimulationScenario(
        name="example", n=args.subjects, k=args.traits, kinds=args.kinds,
        rho=args.rho, sparsity="dense", effect_low=args.effect * 0.8,
        effect_high=args.effect * 1.2, with_covariates=True,
    )

    # the signal SNP drives the traits; the rest are independent noise
    signal = simulate_genotype(args.subjects, scen.maf, rng)
    traits, covariates, beta = simulate_traits(signal, scen, rng)
    genos = [signal.values]
    for _ in range(args.snps - 1):
        genos.append(simulate_genotype(args.subjects, scen.maf, rng).values)
    geno = np.column_stack(genos)
    signal_ids = {f"rs{j}" for j in range(args.signal_snps)}
    for j in range(1, args.signal_snps):
        geno[:, j] = signal.values  # extra copies of the causal genotype

    ids = [f"s{i:05d}" for i in range(args.subjects)]
    with open(f"{args.out}.geno.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id"] + [f"rs{j}" for j in range(args.snps)])
        for i, sid in enumerate(ids):
            w.writerow([sid] + list(geno[i]))
    with open(f"{args.out}.geno.map", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snp_id", "chrom", "pos"])
        for j in range(args.snps):
            w.writerow([f"rs{j}", str(1 + j % 22), str(10_000 + 1000 * j)])
    with open(f"{args.out}.traits.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id"] + traits.names)
        for i, sid in enumerate(ids):
            w.writerow([sid] + [repr(float(v)) for v in traits.values[i]])
    with open(f"{args.out}.trait_types.csv", "w", newline="") as fh:
        for name, kind in zip(traits.names, traits.kinds):
            fh.write(f"{name},{kind}\n")
    with open(f"{args.out}.covar.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id"] + covariates.names)
        for i, sid in enumerate(ids):
            w.writerow([sid] + [repr(float(v)) for v in covariates.values[i]])

    print(f"wrote {args.out}.geno.csv (+map), .traits.csv, .trait_types.csv, .covar.csv")
    print(f"causal SNPs: {sorted(signal_ids)}; nonzero trait effects: "
          f"{[traits.names[j] for j in np.flatnonzero(beta)]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
