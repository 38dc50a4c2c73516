"""Per-episode run records and their CSV form."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

COLUMNS = (
    "seed", "episode", "return", "length", "sigma", "kappa", "phi",
    "alpha", "beta", "epsilon", "deficit", "coverage", "phase",
)


@dataclass(frozen=True)
class RunRecord:
    seed: int
    episode: int
    ret: float
    length: int
    sigma: float
    kappa: float
    phi: float
    alpha: float
    beta: float
    epsilon: float
    deficit: float
    coverage: float
    phase: int


_INT_FIELDS = {"seed", "episode", "length", "phase"}


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    # 17 significant digits round-trips every double
    return format(value, ".17g")


def emit_csv(records: list[RunRecord], path: str | Path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for rec in records:
                writer.writerow([_fmt(v) for v in astuple(rec)])
    except OSError as exc:
        raise OSError(f"failed to write records to {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> list[RunRecord]:
    names = [f.name for f in fields(RunRecord)]
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in reader:
            vals = [int(v) if n in _INT_FIELDS else float(v) for n, v in zip(names, row)]
            out.append(RunRecord(*vals))
    return out


def by_seed(records: list[RunRecord]) -> dict[int, list[RunRecord]]:
    groups: dict[int, list[RunRecord]] = {}
    for rec in records:
        groups.setdefault(rec.seed, []).append(rec)
    for recs in groups.values():
        recs.sort(key=lambda r: r.episode)
    return dict(sorted(groups.items()))
