"""Gaussian synthetic sampling inside pure clusters, the Gaussian-noise
baseline, and the attribute-vector export consumed by external generators."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import FeatureDataset
from .errors import ConfigurationError, DegenerateGeometryError, ExportError
from .purity import ClusterView, Node, RefinementConfig, RefinementTree, collect_pure_clusters, refine_clusters
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_CLAMP = (0.0, 5.0)


@dataclass(frozen=True)
class AugmentConfig:
    alpha: float = 1.0
    seed: int = 0
    singleton_scale: float = 0.01
    range_margin: float = 0.1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class ClusterGeometry:
    mu: np.ndarray
    radius: float
    sigma_diag: np.ndarray
    source_label: int
    source_size: int


@dataclass(eq=False)
class SyntheticBatch:
    """Generated points with per-point provenance.

    ``paths[i]`` names the tree node a point was drawn from and ``draws[i]`` its
    index within that node's draw; ``members`` maps each node path to the
    dataset ``ids`` of the real samples that shaped it.
    """

    points: np.ndarray
    labels: np.ndarray
    paths: list[tuple]
    draws: np.ndarray
    seed: int
    alpha: float
    method: str = "ficaug"
    members: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    @classmethod
    def empty(cls, d, seed, alpha, method="ficaug"):
        return cls(np.empty((0, d)), np.empty(0, dtype=np.int64), [], np.empty(0, dtype=np.int64),
                   seed, alpha, method)

    def source_ids(self) -> set[int]:
        """Real sample ids that influenced any generated point."""
        out: set[int] = set()
        for path in set(self.paths):
            out.update(int(i) for i in self.members[path])
        return out

    def as_dataset(self, like: FeatureDataset) -> FeatureDataset:
        return FeatureDataset(self.points, self.labels, like.feature_names, like.label_names)


def cluster_radius(c: ClusterView, parent_feature_stds, cfg: AugmentConfig | None = None) -> float:
    """Max centroid distance plus a margin of the distance range.

    Singletons, and clusters whose points all coincide, fall back to a small
    fraction of the mean per-feature std of the parent clustering step.
    """
    cfg = cfg or AugmentConfig()
    if c.size > 1:
        dist = np.sqrt(((c.points - c.centroid) ** 2).sum(axis=1))
        r = float(dist.max() + cfg.range_margin * (dist.max() - dist.min()))
        if r > 0:
            return r
    stds = np.asarray(parent_feature_stds, dtype=np.float64)
    r = cfg.singleton_scale * float(stds.mean())
    if not r > 0:
        raise DegenerateGeometryError("all parent feature stds are zero; cannot size the cluster")
    return r


def covariance_from_radius(radius: float, d: int) -> np.ndarray:
    """Diagonal of the isotropic covariance ``(radius/3)^2 I``."""
    if not radius > 0:
        raise ConfigurationError("radius must be positive")
    return np.full(d, (radius / 3.0) ** 2)


def cluster_geometry(c: ClusterView, parent_feature_stds, cfg: AugmentConfig | None = None
                     ) -> ClusterGeometry:
    r = cluster_radius(c, parent_feature_stds, cfg)
    return ClusterGeometry(c.centroid, r, covariance_from_radius(r, len(c.centroid)),
                           int(c.labels[0]), c.size)


def synthetic_budget(n_cluster: int, alpha: float) -> int:
    """``max(1, round(alpha * n))`` with round-half-to-even."""
    return max(1, round(alpha * n_cluster))


def sample_synthetic(geo: ClusterGeometry, q: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``q`` i.i.d. draws from N(mu, diag(sigma_diag)) and their labels."""
    if q < 1:
        raise ConfigurationError("q must be at least 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((q, len(geo.mu)))
    points = geo.mu + z * np.sqrt(geo.sigma_diag)
    return points, np.full(q, geo.source_label, dtype=np.int64)


def _parent_stds(ds: FeatureDataset, tree: RefinementTree, node: Node):
    parent = tree.parent(node)
    pts = ds.X if parent is None else parent.view.points
    return pts.std(axis=0)


def sample_from_tree(ds: FeatureDataset, tree: RefinementTree, cfg: AugmentConfig) -> SyntheticBatch:
    """Draw the synthetic batch from the pure leaves of an existing tree."""
    parts, labels, paths, draws, members, skipped = [], [], [], [], {}, []
    for node in collect_pure_clusters(tree):
        try:
            geo = cluster_geometry(node.view, _parent_stds(ds, tree, node), cfg)
        except DegenerateGeometryError as exc:
            log.warning("skipping cluster %s: %s", node.path_str, exc)
            skipped.append(node.path)
            continue
        q = synthetic_budget(node.view.size, cfg.alpha)
        pts, lab = sample_synthetic(geo, q, derive_seed(cfg.seed, "cluster", *node.path))
        parts.append(pts)
        labels.append(lab)
        paths.extend([node.path] * q)
        draws.append(np.arange(q))
        members[node.path] = ds.ids[node.view.member_ids]
    if not parts:
        log.warning("synthetic batch is empty")
        batch = SyntheticBatch.empty(ds.d, cfg.seed, cfg.alpha)
        batch.skipped = skipped
        return batch
    return SyntheticBatch(np.vstack(parts), np.concatenate(labels), paths, np.concatenate(draws),
                          cfg.seed, cfg.alpha, "ficaug", members, skipped)


def augment_dataset(ds: FeatureDataset, refine_cfg: RefinementConfig, aug_cfg: AugmentConfig
                    ) -> tuple[SyntheticBatch, RefinementTree]:
    tree = refine_clusters(ds, refine_cfg)
    return sample_from_tree(ds, tree, aug_cfg), tree


def gaussian_noise_augment(ds: FeatureDataset, sigma: float, alpha: float, seed: int) -> SyntheticBatch:
    """``round(alpha)`` copies of every sample perturbed by N(0, sigma^2 I)."""
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    copies = round(alpha)
    if copies < 1:
        return SyntheticBatch.empty(ds.d, seed, alpha, "gaussian_noise")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((ds.n, copies, ds.d)) * sigma
    points = (ds.X[:, None, :] + noise).reshape(-1, ds.d)
    labels = np.repeat(ds.y, copies)
    paths = [(int(i),) for i in range(ds.n) for _ in range(copies)]
    draws = np.tile(np.arange(copies), ds.n)
    members = {(int(i),): ds.ids[[i]] for i in range(ds.n)}
    return SyntheticBatch(points, labels, paths, draws, seed, alpha, "gaussian_noise", members)


@dataclass(frozen=True)
class ExportResult:
    path: Path
    n_records: int
    clamp_events: int


def export_attribute_vectors(batch: SyntheticBatch, path, label_names, feature_names,
                             clamp: tuple[float, float] | None = DEFAULT_CLAMP) -> ExportResult:
    """Write ``id,label,<features>`` records for an external image generator.

    Values outside ``clamp`` are clipped and counted; ``clamp=None`` writes the
    raw values, which then reload bit-exactly.
    """
    if len(batch) == 0:
        raise ExportError("refusing to export an empty batch")
    values = batch.points
    events = 0
    if clamp is not None:
        lo, hi = clamp
        if lo > hi:
            raise ConfigurationError(f"invalid clamp range {clamp}")
        outside = (values < lo) | (values > hi)
        events = int(outside.sum())
        values = np.clip(values, lo, hi)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "label", *feature_names])
            for i, (row, lab) in enumerate(zip(values, batch.labels)):
                w.writerow([i, label_names[lab], *(repr(float(v)) for v in row)])
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    if events:
        log.info("clamped %d values into [%g, %g]", events, *clamp)
    return ExportResult(path, len(batch), events)


def read_attribute_vectors(path, label_names=None):
    """Return ``(ids, label_strings, features, feature_names)`` from an export file."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    ids = np.array([int(r[0]) for r in body], dtype=np.int64)
    labels = [r[1] for r in body]
    X = np.array([[float(v) for v in r[2:]] for r in body], dtype=np.float64).reshape(len(body), -1)
    return ids, labels, X, header[2:]


def _path_str(path):
    return ".".join(map(str, path))


def write_batch(batch: SyntheticBatch, path, label_names, feature_names) -> Path:
    """Full-precision batch file with provenance: ``label,path,draw,<features>``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "path", "draw", *feature_names])
        for row, lab, p, k in zip(batch.points, batch.labels, batch.paths, batch.draws):
            w.writerow([label_names[lab], _path_str(p), int(k), *(repr(float(v)) for v in row)])
    return path


def read_batch(path, label_names):
    """Inverse of :func:`write_batch`; returns ``(points, labels, paths, draws)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    lookup = {name: i for i, name in enumerate(label_names)}
    labels = np.array([lookup[r[0]] for r in body], dtype=np.int64)
    paths = [tuple(int(p) for p in r[1].split(".")) if r[1] else () for r in body]
    draws = np.array([int(r[2]) for r in body], dtype=np.int64)
    points = np.array([[float(v) for v in r[3:]] for r in body], dtype=np.float64)
    return points.reshape(len(body), len(rows[0]) - 3), labels, paths, draws
