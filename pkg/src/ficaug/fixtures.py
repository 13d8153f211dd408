"""Synthetic labeled datasets used by the tests, the acceptance suite and the
``fixture`` CLI command."""

from __future__ import annotations

import numpy as np

from .data import FeatureDataset

EMOTIONS = ("anger", "disgust", "fear", "happiness", "surprise")


def make_blobs(n_per_class=20, d=15, gap=3.0, seed=0, sigma=1.0, n_classes=2,
               offset=0.0, per_feature=False) -> FeatureDataset:
    """Isotropic Gaussian classes with per-coordinate spread ``sigma``.

    Neighbouring class means are ``gap * sigma`` apart in Euclidean distance,
    along the all-ones diagonal.  With ``per_feature=True`` the shift is
    ``gap * sigma`` on every feature instead (distance ``gap * sigma * sqrt(d)``).
    """
    rng = np.random.default_rng(seed)
    step = gap * sigma if per_feature else gap * sigma / np.sqrt(d)
    X = np.vstack([
        offset + c * step + sigma * rng.standard_normal((n_per_class, d))
        for c in range(n_classes)
    ])
    y = np.repeat(np.arange(n_classes), n_per_class)
    names = [f"f{j}" for j in range(d)]
    return FeatureDataset(X, y, names, [str(c) for c in range(n_classes)])


def make_multiview(n_subjects=55, n_views=5, d=15, gap=1.0, seed=0, n_positive=None,
                   low=0.0, high=5.0) -> FeatureDataset:
    """One row per subject x view, AU-like magnitudes clipped to [low, high].

    Labels are ``ctrl`` / ``pd`` per subject (``n_positive`` subjects are
    ``pd``, default about half) and every view shifts the class means by its
    own offset so views differ.
    """
    rng = np.random.default_rng(seed)
    n_positive = n_subjects // 2 if n_positive is None else n_positive
    subject_label = np.zeros(n_subjects, dtype=np.int64)
    subject_label[rng.permutation(n_subjects)[:n_positive]] = 1
    view_offset = rng.uniform(1.0, 3.0, size=(n_views, d))
    subject_effect = 0.3 * rng.standard_normal((n_subjects, d))
    rows, labels, subjects, views = [], [], [], []
    for v in range(n_views):
        for s in range(n_subjects):
            # label 1 ("pd") is dampened: reduced expressivity
            centre = view_offset[v] - 0.5 * gap * subject_label[s]
            rows.append(centre + subject_effect[s] + 0.5 * rng.standard_normal(d))
            labels.append(subject_label[s])
            subjects.append(f"s{s:03d}")
            views.append(v)
    X = np.clip(np.array(rows), low, high)
    names = tuple(EMOTIONS[:n_views]) if n_views <= len(EMOTIONS) else tuple(
        f"view{v}" for v in range(n_views))
    return FeatureDataset(X, labels, [f"AU{j:02d}" for j in range(d)], ["ctrl", "pd"],
                          subjects, views, names)
