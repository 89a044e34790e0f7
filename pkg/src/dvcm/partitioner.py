"""Random subsets of the training data, one independent draw per subset."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _seeding
from .model import Dataset


@dataclass(frozen=True)
class SubsetPlan:
    """``k`` lists of ``m`` distinct observation positions into the full dataset."""

    k: int
    m: int
    assignments: tuple[tuple[int, ...], ...]
    seed: int

    def __post_init__(self):
        if len(self.assignments) != self.k:
            raise ValueError("one assignment list per subset")
        for ids in self.assignments:
            if len(ids) != self.m or len(set(ids)) != self.m:
                raise ValueError("each subset must hold exactly m distinct identifiers")

    def to_manifest(self) -> str:
        lines = [f"# subsets k={self.k} m={self.m} seed={self.seed}"]
        lines += [" ".join(str(i) for i in ids) for ids in self.assignments]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_manifest())

    @classmethod
    def from_manifest(cls, text: str) -> "SubsetPlan":
        header, *rows = [ln for ln in text.splitlines() if ln.strip()]
        fields = dict(tok.split("=") for tok in header.lstrip("#").split()[1:])
        assignments = tuple(tuple(int(t) for t in row.split()) for row in rows)
        return cls(int(fields["k"]), int(fields["m"]), assignments, int(fields["seed"]))


def make_subsets(dataset: Dataset | int, k: int, m: int, seed: int) -> SubsetPlan:
    """Draw ``k`` subsets of ``m`` observations, each without replacement.

    Subsets are sampled independently of one another, so two subsets may
    share observations. Each subset has its own stream derived from
    ``(seed, subset index)``; positions inside a subset are sorted.
    """
    n = dataset if isinstance(dataset, int) else dataset.n
    if k <= 0:
        raise ValueError("number of subsets k must be positive")
    if not 1 <= m <= n:
        raise ValueError(f"subset size m must satisfy 1 <= m <= n={n}")
    assignments = []
    for j in range(k):
        rng = _seeding.derive_rng(seed, _seeding.PARTITION, j)
        pick = np.sort(rng.choice(n, size=m, replace=False))
        assignments.append(tuple(int(i) for i in pick))
    return SubsetPlan(k, m, tuple(assignments), int(seed))
