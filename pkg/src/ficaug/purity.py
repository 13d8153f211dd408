"""Cluster purity scoring and recursive re-clustering of mixed clusters.

A mixed cluster is scored by its class separation metric (mean cross-class
distance over summed within-class mean distance) divided by its label
entropy.  The normalized score decides whether the cluster is re-clustered
(score at or above the threshold) or discarded.  Pure clusters become leaves
that feed the sampler.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Callable, Iterator

import numpy as np

from .data import FeatureDataset
from .errors import ConfigurationError, ContractError
from .kmeans import KMeansConfig, auto_k, kmeans_fit
from .seeding import derive_seed

log = logging.getLogger(__name__)

PERFECT = math.inf  # zero within-class spread, positive cross-class distance
DEGENERATE = math.nan  # no spread at all: 0/0


@dataclass(frozen=True, eq=False)
class ClusterView:
    member_ids: np.ndarray  # positional indices into the dataset that was clustered
    points: np.ndarray
    labels: np.ndarray
    centroid: np.ndarray

    @classmethod
    def from_members(cls, X, y, members):
        members = np.asarray(members, dtype=np.int64)
        if members.size == 0:
            raise ContractError("a cluster must have at least one member")
        points = X[members]
        return cls(members, points, y[members], points.mean(axis=0))

    @property
    def size(self) -> int:
        return len(self.member_ids)

    @property
    def is_pure(self) -> bool:
        return bool(np.all(self.labels == self.labels[0]))

    @property
    def label(self) -> int | None:
        return int(self.labels[0]) if self.is_pure else None

    def histogram(self, n_classes) -> np.ndarray:
        return np.bincount(self.labels, minlength=n_classes)


def _pair_distances(A, B) -> list[float]:
    """Euclidean distances for every (a, b) pair, each a correctly rounded sum."""
    sq = (A[:, None, :] - B[None, :, :]) ** 2
    return [math.sqrt(math.fsum(row)) for row in sq.reshape(-1, A.shape[1])]


def _groups(c: ClusterView):
    return [c.points[c.labels == lab] for lab in np.unique(c.labels)]


def intra_cohesion(c: ClusterView) -> float:
    """Sum over labels of the mean distance between distinct same-label points.

    Labels with a single member contribute zero.
    """
    terms = []
    for g in _groups(c):
        n = len(g)
        if n > 1:
            terms.append(math.fsum(_pair_distances(g, g)) / (n * (n - 1)))
    return math.fsum(terms)


def inter_separation(c: ClusterView) -> float:
    groups = _groups(c)
    if len(groups) < 2:
        raise ContractError("inter-class separation needs at least two labels in the cluster")
    return math.fsum(
        math.fsum(_pair_distances(a, b)) / (len(a) * len(b)) for a, b in combinations(groups, 2)
    )


def _ratio(inter, intra):
    if intra > 0:
        return inter / intra
    return PERFECT if inter > 0 else DEGENERATE


def csm(c: ClusterView) -> float:
    """Class separation metric; ``inf`` flags perfect separation, ``nan`` 0/0."""
    return _ratio(inter_separation(c), intra_cohesion(c))


def entropy(c: ClusterView) -> float:
    counts = np.bincount(c.labels)
    n = c.size
    return -math.fsum((k / n) * math.log2(k / n) for k in counts.tolist() if k > 0) + 0.0


def separation_criterion(csm_value: float, entropy_value: float) -> float:
    if entropy_value <= 0:
        raise ContractError("separation criterion is undefined for a pure cluster")
    if math.isnan(csm_value) or math.isinf(csm_value):
        return csm_value
    return csm_value / entropy_value


def _ratio_map(x):
    return x / (1.0 + x)


def _exp_map(x):
    return -math.expm1(-x)


NORMALIZERS: dict[str, Callable[[float], float]] = {"ratio": _ratio_map, "exp": _exp_map}


def normalize_criterion(raw: float, method: str = "ratio") -> float:
    if math.isnan(raw):
        return 0.0
    if math.isinf(raw):
        return 1.0
    return NORMALIZERS[method](raw)


def normalize_criteria(raw, method: str = "ratio") -> list[float]:
    """Map raw criteria into [0, 1]: finite ``x -> x/(1+x)``, perfect -> 1, degenerate -> 0."""
    return [normalize_criterion(x, method) for x in raw]


@dataclass(frozen=True)
class ClusterScore:
    entropy: float
    intra: float | None = None
    inter: float | None = None
    csm: float | None = None
    criterion_raw: float | None = None
    criterion_norm: float | None = None

    @property
    def pure(self) -> bool:
        return self.csm is None

    @property
    def flag(self) -> str | None:
        if self.pure:
            return "pure"
        if math.isinf(self.csm):
            return "perfectly-separated"
        if math.isnan(self.csm):
            return "degenerate"
        return None


def score_cluster(c: ClusterView, method: str = "ratio") -> ClusterScore:
    h = entropy(c)
    if c.is_pure:
        return ClusterScore(entropy=0.0)
    intra, inter = intra_cohesion(c), inter_separation(c)
    m = _ratio(inter, intra)
    raw = separation_criterion(m, h)
    return ClusterScore(h, intra, inter, m, raw, normalize_criterion(raw, method))


class NodeStatus(str, enum.Enum):
    PURE = "pure-leaf"
    DISCARDED = "mixed-discarded"
    SPLIT = "split"


@dataclass(frozen=True)
class RefinementConfig:
    threshold: float = 0.5
    max_depth: int = 8
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    normalization: str = "ratio"
    auto_k: bool = False  # pick the root k by the elbow of an inertia sweep

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.max_depth < 1:
            raise ConfigurationError("max_depth must be positive")
        if self.normalization not in NORMALIZERS:
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")


@dataclass(eq=False)
class Node:
    path: tuple[int, ...]
    view: ClusterView
    score: ClusterScore
    status: NodeStatus
    children: list["Node"] = field(default_factory=list)
    reason: str = ""

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def path_str(self) -> str:
        return ".".join(map(str, self.path))


@dataclass(eq=False)
class RefinementTree:
    roots: list[Node]
    config: RefinementConfig
    n_classes: int
    n_samples: int
    root_k: int = 0

    def nodes(self) -> Iterator[Node]:
        stack = list(reversed(self.roots))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_leaf]

    def node(self, path) -> Node:
        level = self.roots
        found = None
        for i in path:
            found = level[i]
            level = found.children
        return found

    def parent(self, node: Node) -> Node | None:
        return self.node(node.path[:-1]) if len(node.path) > 1 else None

    @property
    def n_splits(self) -> int:
        return sum(n.status is NodeStatus.SPLIT for n in self.nodes())

    @property
    def depth(self) -> int:
        return max(n.depth for n in self.nodes())

    def report(self, label_names=None, feature_names=None) -> str:
        """One line per node: path, size, label histogram, scores, status."""
        names = label_names or [str(i) for i in range(self.n_classes)]
        lines = ["path\tsize\tlabels\tintra\tinter\tcsm\tentropy\tcriterion\tnormalized\tstatus"]
        fmt = lambda v: "-" if v is None else f"{v:.6g}"
        for n in self.nodes():
            hist = n.view.histogram(self.n_classes)
            labels = ",".join(f"{names[i]}:{int(k)}" for i, k in enumerate(hist) if k)
            s = n.score
            status = n.status.value + (f" ({n.reason})" if n.reason else "")
            lines.append("\t".join([
                n.path_str, str(n.view.size), labels, fmt(s.intra), fmt(s.inter), fmt(s.csm),
                fmt(s.entropy), fmt(s.criterion_raw), fmt(s.criterion_norm), status,
            ]))
        return "\n".join(lines) + "\n"


def _splittable(view: ClusterView, n_classes: int) -> str:
    """Empty string when k-means with k = n_classes can split ``view``; else why not."""
    if view.size < n_classes:
        return "fewer members than classes"
    if len(np.unique(view.points, axis=0)) < n_classes:
        return "fewer distinct points than classes"
    return ""


def refine_clusters(ds: FeatureDataset, cfg: RefinementConfig) -> RefinementTree:
    """Cluster ``ds`` and recursively re-cluster mixed clusters.

    A mixed cluster whose normalized criterion reaches ``cfg.threshold`` is
    split into ``n_classes`` children; below the threshold it is discarded.
    A threshold of 1 never splits, so k-means runs exactly once.
    """
    L = ds.n_classes
    X, y = ds.X, ds.y
    root_k = auto_k(X, L + 1, cfg_base=cfg.kmeans) if cfg.auto_k else cfg.kmeans.k
    if root_k <= L:
        raise ConfigurationError(
            f"root k={root_k} must be greater than the number of classes ({L})"
        )

    def build(members, path):
        view = ClusterView.from_members(X, y, members)
        score = score_cluster(view, cfg.normalization)
        if score.pure:
            return Node(path, view, score, NodeStatus.PURE)
        if cfg.threshold >= 1.0 or score.criterion_norm < cfg.threshold:
            return Node(path, view, score, NodeStatus.DISCARDED, reason="below threshold")
        if len(path) >= cfg.max_depth:
            return Node(path, view, score, NodeStatus.DISCARDED, reason="max depth")
        why = _splittable(view, L)
        if why:
            return Node(path, view, score, NodeStatus.DISCARDED, reason=why)
        child_cfg = replace(cfg.kmeans, k=L, seed=derive_seed(cfg.kmeans.seed, "node", *path))
        res = kmeans_fit(view.points, child_cfg)
        node = Node(path, view, score, NodeStatus.SPLIT)
        node.children = [
            build(view.member_ids[res.assignment == j], path + (j,)) for j in range(L)
        ]
        return node

    root = kmeans_fit(X, replace(cfg.kmeans, k=root_k))
    roots = [build(np.flatnonzero(root.assignment == j), (j,)) for j in range(root_k)]
    return RefinementTree(roots, cfg, L, ds.n, root_k)


def collect_pure_clusters(tree: RefinementTree) -> list[Node]:
    """Pure leaves in path order; each node's ``view.label`` is its class."""
    pure = [n for n in tree.nodes() if n.status is NodeStatus.PURE]
    if not pure:
        log.warning("refinement produced no pure clusters; nothing to sample from")
    return pure
