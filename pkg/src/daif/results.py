"""Results table: one row per trained cell plus averages over prediction lengths."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

RESULT_COLUMNS = ["dataset", "backbone", "aug", "S", "P", "K", "seed", "mse", "mae", "train_seconds"]


@dataclass
class ResultRow:
    dataset: str
    backbone: str
    aug: str
    S: int | str
    P: int | str
    K: int | str
    seed: int | str
    mse: float
    mae: float
    train_seconds: float = 0.0

    def key(self):
        return (self.dataset, self.backbone, self.aug, str(self.P), str(self.K), str(self.seed))

    def cells(self) -> list[str]:
        return [self.dataset, self.backbone, self.aug, str(self.S), str(self.P), str(self.K),
                str(self.seed), f"{self.mse:.6f}", f"{self.mae:.6f}", f"{self.train_seconds:.3f}"]


def average_over_horizons(rows: Sequence[ResultRow]) -> list[ResultRow]:
    """One ``S=avg`` row per (dataset, backbone, aug, P, K, seed) group."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(r.key(), []).append(r)
    out = []
    for key, members in groups.items():
        n = len(members)
        first = members[0]
        out.append(ResultRow(first.dataset, first.backbone, first.aug, "avg", first.P, first.K,
                             first.seed,
                             math.fsum(m.mse for m in members) / n,
                             math.fsum(m.mae for m in members) / n,
                             math.fsum(m.train_seconds for m in members) / n))
    return out


def _sort_key(r: ResultRow):
    s = (1, 0) if r.S == "avg" else (0, int(r.S))
    seed = (0, int(r.seed)) if str(r.seed).isdigit() else (1, 0)
    return (r.dataset, r.backbone, r.aug, str(r.P), str(r.K), seed, s)


def write_results(path, rows: Iterable[ResultRow], with_averages: bool = True) -> list[ResultRow]:
    rows = [r for r in rows if r.S != "avg"]
    if with_averages:
        rows = rows + average_over_horizons(rows)
    rows.sort(key=_sort_key)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow(r.cells())
    return rows


def read_results(path) -> list[ResultRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ValueError(f"{path} does not have the results header")
        return [ResultRow(r["dataset"], r["backbone"], r["aug"], r["S"], r["P"], r["K"],
                          r["seed"], float(r["mse"]), float(r["mae"]),
                          float(r["train_seconds"])) for r in reader]
