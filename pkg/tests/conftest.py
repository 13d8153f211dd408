import itertools
import math

import numpy as np
import pytest

from ficaug.fixtures import make_blobs


def naive_intra(points, labels):
    """Double loop over ordered same-label pairs, one mean per label."""
    total = []
    for lab in sorted(set(labels)):
        idx = [i for i, l in enumerate(labels) if l == lab]
        n = len(idx)
        if n < 2:
            continue
        dists = []
        for i in idx:
            for j in idx:
                if i != j:
                    dists.append(math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(points[i], points[j]))))
        total.append(math.fsum(dists) / (n * (n - 1)))
    return math.fsum(total)


def naive_inter(points, labels):
    labs = sorted(set(labels))
    terms = []
    for la, lb in itertools.combinations(labs, 2):
        ia = [i for i, l in enumerate(labels) if l == la]
        ib = [i for i, l in enumerate(labels) if l == lb]
        dists = [math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(points[i], points[j])))
                 for i in ia for j in ib]
        terms.append(math.fsum(dists) / (len(ia) * len(ib)))
    return math.fsum(terms)


def naive_entropy(labels):
    n = len(labels)
    out = 0.0
    for lab in set(labels):
        p = labels.count(lab) / n
        out -= p * math.log2(p)
    return out


def exhaustive_kmeans(points, k):
    """Minimum inertia over every assignment of points to k non-empty groups."""
    n = len(points)
    best = math.inf
    for assign in itertools.product(range(k), repeat=n):
        if assign[0] != 0 or len(set(assign)) != k:
            continue
        a = np.array(assign)
        inertia = sum(((points[a == j] - points[a == j].mean(axis=0)) ** 2).sum() for j in range(k))
        best = min(best, inertia)
    return best


@pytest.fixture
def blobs():
    return make_blobs(20, 15, 3.0, seed=0)


@pytest.fixture
def separable():
    return make_blobs(20, 15, 10.0, seed=1, per_feature=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
