"""Lloyd's k-means with distance-weighted seeding, restarts and a k sweep."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InfeasibleError, ShapeError
from .seeding import derive_seed


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    max_iters: int = 300
    tol: float = 1e-6
    seed: int = 0
    n_init: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1 or self.n_init < 1:
            raise ConfigurationError("max_iters and n_init must be positive")
        if self.tol < 0:
            raise ConfigurationError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    iterations: int
    converged: bool


def _sq_dists(points, centroids):
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assign(points, centroids) -> np.ndarray:
    """Index of the nearest centroid per point; ties go to the lowest index."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if points.shape[1] != centroids.shape[1]:
        raise ShapeError(
            f"points have dimension {points.shape[1]}, centroids {centroids.shape[1]}"
        )
    return np.argmin(_sq_dists(points, centroids), axis=1)


def _inertia(points, centroids, labels):
    diff = points - centroids[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _seed_centroids(points, k, rng):
    n = len(points)
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(points, points[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, _sq_dists(points, points[[idx]])[:, 0])
    return points[chosen].copy()


def _assign_with_repair(points, centroids):
    """Nearest-centroid labels, reseeding empty clusters at the farthest point.

    Mutates ``centroids`` in place when a repair happens; returns
    ``(labels, repaired)``.
    """
    d2 = _sq_dists(points, centroids)
    labels = np.argmin(d2, axis=1)
    cost = d2[np.arange(len(points)), labels]
    k = len(centroids)
    counts = np.bincount(labels, minlength=k)
    repaired = False
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        if not movable.any():
            break
        far = int(np.argmax(np.where(movable, cost, -1.0)))
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        cost[far] = 0.0
        centroids[j] = points[far]
        repaired = True
    return labels, repaired


def _lloyd(points, init, cfg, trace=None):
    centroids = np.array(init, dtype=np.float64)
    k = len(centroids)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        labels, repaired = _assign_with_repair(points, centroids)
        if trace is not None:
            trace(it, _inertia(points, centroids, labels))
        new = np.zeros_like(centroids)
        np.add.at(new, labels, points)
        counts = np.bincount(labels, minlength=k)
        new /= counts[:, None]
        shift = float(np.sqrt(_sq_dists(new, centroids)[np.arange(k), np.arange(k)].max()))
        centroids = new
        if shift <= cfg.tol and not repaired:
            converged = True
            break
    labels, _ = _assign_with_repair(points, centroids)
    inertia = _inertia(points, centroids, labels)
    if trace is not None:
        trace(it + 1, inertia)
    return KMeansResult(centroids, labels, inertia, it, converged)


def _check(points, k):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise ShapeError(f"points must be a 2-D matrix, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ShapeError("points must be finite")
    if len(points) < k:
        raise InfeasibleError(f"cannot form {k} clusters from {len(points)} points")
    return points


def kmeans_fit(points, cfg: KMeansConfig,
               trace: Callable[[int, int, float], None] | None = None,
               extra_inits=()) -> KMeansResult:
    """Best-inertia Lloyd fit over ``cfg.n_init`` seeded restarts.

    ``trace(restart, iteration, inertia)`` is called after every assignment
    step.  ``extra_inits`` are additional starting centroid sets tried after
    the seeded restarts; ties keep the earlier candidate.
    """
    points = _check(points, cfg.k)
    inits = [
        _seed_centroids(points, cfg.k, np.random.default_rng(derive_seed(cfg.seed, "restart", r)))
        for r in range(cfg.n_init)
    ]
    inits.extend(np.asarray(c, dtype=np.float64) for c in extra_inits)
    best = None
    for r, init in enumerate(inits):
        hook = None if trace is None else (lambda it, value, r=r: trace(r, it, value))
        res = _lloyd(points, init, cfg, hook)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def sweep_k(points, k_range, cfg_base: KMeansConfig | None = None) -> list[tuple[int, float]]:
    """Best-of-restarts inertia for each k in ``k_range`` (elbow curve data).

    The k-cluster solution plus its worst-served point seeds one extra
    candidate for k+1, which keeps the curve non-increasing.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigurationError("empty k range")
    cfg_base = cfg_base or KMeansConfig()
    points = _check(points, ks[-1])
    if ks[0] < 1:
        raise ConfigurationError(f"k range must lie within [1, {len(points)}]")
    out = []
    prev = None
    for k in ks:
        extra = []
        if prev is not None and len(prev.centroids) == k - 1:
            d2 = _sq_dists(points, prev.centroids)[np.arange(len(points)), prev.assignment]
            extra.append(np.vstack([prev.centroids, points[int(np.argmax(d2))]]))
        res = kmeans_fit(points, replace(cfg_base, k=k), extra_inits=extra)
        out.append((k, res.inertia))
        prev = res
    return out


def elbow_k(curve) -> int:
    """Knee of an inertia curve: the k farthest below the chord joining its ends.

    ``curve`` is the ``(k, inertia)`` list from :func:`sweep_k`.  Curves with
    fewer than three points return their first k.
    """
    ks = np.array([k for k, _ in curve], dtype=np.float64)
    inertia = np.array([v for _, v in curve], dtype=np.float64)
    if len(ks) < 3 or inertia[0] == inertia[-1]:
        return int(ks[0])
    x = (ks - ks[0]) / (ks[-1] - ks[0])
    y = (inertia - inertia[-1]) / (inertia[0] - inertia[-1])
    # chord runs from (0, 1) to (1, 0); distance below it is 1 - x - y
    return int(ks[int(np.argmax(1.0 - x - y))])


def auto_k(points, min_k, max_k=None, cfg_base: KMeansConfig | None = None) -> int:
    """Elbow-selected k over ``[min_k, max_k]`` (default ``max_k = n // 2``)."""
    n = len(points)
    max_k = max(min_k, n // 2 if max_k is None else min(max_k, n))
    if max_k - min_k < 2:
        return min_k
    return elbow_k(sweep_k(points, range(min_k, max_k + 1), cfg_base))
