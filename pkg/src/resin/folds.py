"""Subject-disjoint cross-validation folds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from resin.errors import ParameterError, TooFewSubjectsError

if TYPE_CHECKING:
    from collections.abc import Iterable

MIN_FOLDS = 2


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every subject to one of `k` folds."""

    k: int
    assignments: dict[str, int]

    def fold_of(self, subject_id: str) -> int:
        return self.assignments[subject_id]

    def test_subjects(self, fold: int) -> list[str]:
        return sorted(subject for subject, index in self.assignments.items() if index == fold)

    def train_subjects(self, fold: int) -> list[str]:
        return sorted(subject for subject, index in self.assignments.items() if index != fold)

    def sizes(self) -> list[int]:
        return [len(self.test_subjects(fold)) for fold in range(self.k)]


def make_folds(subjects: Iterable[str], k: int = 10, seed: int = 0) -> FoldPlan:
    """Shuffle the subjects with `seed` and deal them round-robin into `k` folds.

    The subjects are sorted before shuffling so the plan depends only on the set of
    subjects and the seed. Fold sizes differ by at most one.

    Raises:
        ParameterError: If k < 2.
        TooFewSubjectsError: If there are fewer subjects than folds.
    """
    if k < MIN_FOLDS:
        raise ParameterError('folds', k, f'must be at least {MIN_FOLDS}')
    ordered = sorted(set(subjects))
    if len(ordered) < k:
        raise TooFewSubjectsError(subjects=len(ordered), folds=k)
    order = np.random.default_rng(seed).permutation(len(ordered))
    return FoldPlan(k=k, assignments={ordered[index]: position % k for position, index in enumerate(order)})
