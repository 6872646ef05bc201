"""CSV parsing and result emission.

All files are comma-separated UTF-8 with a header row and `.` decimals.
The genotype table is `subject_id,<snp>,...` with 0/1/2 values and an
optional `<stem>.map` sidecar (`snp_id,chrom,pos`); traits come with a
types file of `name,continuous|binary` lines; covariates are numeric.
Results keep the input SNP order; the QQ file is sorted ascending.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .data import BINARY, CONTINUOUS, CovariateMatrix, GenotypeVector, TraitMatrix
from .engine import AssociationRecord

RESULT_COLUMNS = [
    "snp_id", "chrom", "pos", "p_value", "n_perm", "status",
    "p_binary", "p_continuous_original", "p_continuous_pca", "p_lower", "p_upper",
]
_BRANCH_KEYS = ["binary", "continuous_original", "continuous_pca", "lower", "upper"]


class ParseError(Exception):
    """Malformed input file; message carries the file and line number."""


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip
    return str(value)


def _read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from None
    if not rows:
        raise ParseError(f"{path}, line 1: file is empty")
    header, body = rows[0], rows[1:]
    width = len(header)
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise ParseError(
                f"{path}, line {i}: expected {width} fields, found {len(row)}"
            )
    return header, body


def _numeric(path, body, line_offset=2) -> np.ndarray:
    out = np.empty((len(body), len(body[0]) - 1)) if body else np.empty((0, 0))
    for i, row in enumerate(body):
        for j, cell in enumerate(row[1:]):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}, line {i + line_offset}: non-numeric value {cell!r}"
                ) from None
    return out


def read_genotypes(path: str | Path) -> tuple[list[str], list[GenotypeVector]]:
    """Parse the genotype table plus its `.map` sidecar when present."""
    path = Path(path)
    header, body = _read_table(path)
    if len(header) < 2:
        raise ParseError(f"{path}, line 1: need subject_id plus at least one SNP column")
    subject_ids = [row[0] for row in body]
    values = np.empty((len(body), len(header) - 1), dtype=np.int8)
    for i, row in enumerate(body):
        for j, cell in enumerate(row[1:]):
            if cell not in ("0", "1", "2"):
                raise ParseError(
                    f"{path}, line {i + 2}: genotype value {cell!r} is not 0/1/2"
                )
            values[i, j] = int(cell)

    positions: dict[str, tuple[str, int]] = {}
    map_path = path.with_suffix(".map")
    if map_path.exists() and map_path != path:
        m_header, m_body = _read_table(map_path)
        if [h.strip() for h in m_header[:3]] != ["snp_id", "chrom", "pos"]:
            raise ParseError(f"{map_path}, line 1: expected header snp_id,chrom,pos")
        for i, row in enumerate(m_body, start=2):
            try:
                positions[row[0]] = (row[1], int(row[2]))
            except ValueError:
                raise ParseError(
                    f"{map_path}, line {i}: position {row[2]!r} is not an integer"
                ) from None

    snps = []
    for j, snp_id in enumerate(header[1:]):
        chrom, pos = positions.get(snp_id, (None, None))
        snps.append(GenotypeVector(snp_id=snp_id, values=values[:, j], chrom=chrom, pos=pos))
    return subject_ids, snps


def read_traits(path: str | Path, types_path: str | Path) -> tuple[list[str], TraitMatrix]:
    path, types_path = Path(path), Path(types_path)
    header, body = _read_table(path)
    if len(header) < 2:
        raise ParseError(f"{path}, line 1: need subject_id plus at least one trait column")
    declared: dict[str, str] = {}
    t_header, t_body = _read_table(types_path)
    for i, row in enumerate([t_header] + t_body, start=1):
        if len(row) != 2:
            raise ParseError(f"{types_path}, line {i}: expected `name,continuous|binary`")
        name, kind = row[0].strip(), row[1].strip()
        if name == "trait_name" and kind in ("type", "kind"):
            continue  # optional header line
        if kind not in (CONTINUOUS, BINARY):
            raise ParseError(
                f"{types_path}, line {i}: kind {kind!r} is not continuous/binary"
            )
        declared[name] = kind

    names = header[1:]
    kinds = []
    for name in names:
        if name not in declared:
            raise ParseError(
                f"{types_path}: trait {name!r} has no declared type"
            )
        kinds.append(declared[name])
    values = _numeric(path, body)
    return [row[0] for row in body], TraitMatrix(names=names, kinds=kinds, values=values)


def read_covariates(path: str | Path) -> tuple[list[str], CovariateMatrix]:
    path = Path(path)
    header, body = _read_table(path)
    if len(header) < 2:
        raise ParseError(f"{path}, line 1: need subject_id plus at least one column")
    values = _numeric(path, body)
    return [row[0] for row in body], CovariateMatrix(names=header[1:], values=values)


def write_results(path: str | Path, records: list[AssociationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for rec in records:
            row = [rec.snp_id, _fmt(rec.chrom), _fmt(rec.pos),
                   _fmt(rec.p_value), rec.n_perm, rec.status]
            row += [_fmt(rec.branch_pvalues.get(k)) for k in _BRANCH_KEYS]
            writer.writerow(row)


def read_results(path: str | Path) -> list[AssociationRecord]:
    header, body = _read_table(path)
    if header != RESULT_COLUMNS:
        raise ParseError(f"{path}, line 1: unexpected results header")
    records = []
    for row in body:
        named = dict(zip(header, row))
        branch = {
            key: float(named[f"p_{key}"])
            for key in _BRANCH_KEYS
            if named[f"p_{key}"] != ""
        }
        records.append(
            AssociationRecord(
                snp_id=named["snp_id"],
                chrom=named["chrom"] or None,
                pos=int(named["pos"]) if named["pos"] else None,
                p_value=float(named["p_value"]) if named["p_value"] else None,
                n_perm=int(named["n_perm"]),
                branch_pvalues=branch,
                status=named["status"],
            )
        )
    return records


def write_qq(path: str | Path, records: list[AssociationRecord]) -> None:
    """Expected vs observed -log10 p, both columns ascending."""
    pvals = sorted(r.p_value for r in records if r.p_value is not None)
    m = len(pvals)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["expected_neglog10", "observed_neglog10"])
        # pvals descending pair with expected quantiles (i - 0.5)/m descending
        for rank, p in enumerate(reversed(pvals), start=0):
            expected = -math.log10((m - rank - 0.5) / m)
            writer.writerow([_fmt(expected), _fmt(-math.log10(p))])


def write_manhattan(path: str | Path, records: list[AssociationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chrom", "pos", "neglog10_p"])
        for rec in records:
            if rec.p_value is None:
                continue
            writer.writerow([_fmt(rec.chrom), _fmt(rec.pos), _fmt(-math.log10(rec.p_value))])


def write_power_reports(path: str | Path, reports) -> None:
    columns = [
        "scenario", "method", "n", "k", "kinds", "rho", "sparsity",
        "effect_low", "effect_high", "with_covariates", "replicates",
        "b_perm", "alpha", "rejection_rate", "mc_stderr",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for rep in reports:
            s = rep.scenario
            writer.writerow([
                s.name, rep.method, s.n, s.k, s.kinds, _fmt(s.rho), s.sparsity,
                _fmt(s.effect_low), _fmt(s.effect_high), int(s.with_covariates),
                s.replicates, s.b_perm, _fmt(s.alpha),
                _fmt(rep.rejection_rate), _fmt(rep.mc_stderr),
            ])
