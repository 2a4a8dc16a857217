# -*- coding: utf-8 -*-

import numpy as np
import pytest

from nulitenet.core.tensor import Rng
from nulitenet.errors import DataError, UsageError
from nulitenet.train.kfold import kfold_split


def _check_partition(splits, n):
    tests = [test for _, test in splits]
    assert np.array_equal(np.sort(np.concatenate(tests)), np.arange(n))
    for train, test in splits:
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == n


def test_balanced_partition():
    labels = np.repeat(np.arange(10), 10)
    splits = kfold_split(labels, 10)
    _check_partition(splits, 100)
    assert all(test.size == 10 for _, test in splits)


def test_every_class_in_every_fold():
    labels = np.repeat(np.arange(50), 10)
    for _, test in kfold_split(labels, 10, seed=3):
        assert set(labels[test]) == set(range(50))


def test_landmark_sized_split():
    counts = np.full(50, 81)
    counts[:10] += 1
    labels = np.repeat(np.arange(50), counts)
    assert labels.size == 4060
    sizes = [test.size for _, test in kfold_split(labels, 10)]
    assert all(abs(s - 406) <= 1 for s in sizes)


@pytest.mark.parametrize("case", range(40))
def test_random_label_sets(case):
    rng = Rng(1000 + case)
    folds = int(rng.integers(2, 7))
    classes = int(rng.integers(1, 6))
    labels = np.repeat(np.arange(classes), rng.integers(folds, 3 * folds, size=classes))
    labels = labels[rng.permutation(labels.size)]
    splits = kfold_split(labels, folds, seed=case)
    _check_partition(splits, labels.size)
    sizes = [test.size for _, test in splits]
    assert max(sizes) - min(sizes) <= 1
    for c in range(classes):
        per_fold = [np.sum(labels[test] == c) for _, test in splits]
        assert min(per_fold) >= 1
        assert max(per_fold) - min(per_fold) <= 1


def test_deterministic():
    labels = np.repeat(np.arange(3), 7)
    a = kfold_split(labels, 3, seed=5)
    b = kfold_split(labels, 3, seed=5)
    assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))


def test_rejects():
    with pytest.raises(UsageError):
        kfold_split(np.zeros(10), 1)
    with pytest.raises(DataError):
        kfold_split(np.array([0, 0, 0, 1]), 2)
