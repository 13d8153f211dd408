"""Leave-pair-out evaluation, weighted-vote ensembling, alpha search and
baseline / Gaussian-noise / cluster-guided comparison."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import FeatureDataset, make_leave_pair_out_folds, split_by_view
from .errors import ConfigurationError
from .kmeans import KMeansConfig
from .models import CLASSIFIERS, MlpConfig, make_classifier
from .purity import RefinementConfig, refine_clusters
from .sampler import AugmentConfig, SyntheticBatch, gaussian_noise_augment, sample_from_tree
from .seeding import derive_seed

log = logging.getLogger(__name__)

METHODS = ("baseline", "gaussian_noise", "ficaug")


@dataclass(frozen=True)
class ExperimentConfig:
    refine: RefinementConfig = field(default_factory=RefinementConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    alphas: tuple[float, ...] | None = None
    noise_sigmas: tuple[float, ...] = (0.25,)
    noise_alpha: float = 1.0
    knn_k: int = 3
    mlp: MlpConfig = field(default_factory=MlpConfig)
    seed: int = 0
    refit_per_fold: bool = True


@dataclass(eq=False)
class FoldResult:
    fold: int
    method: str
    classifier: str
    validation_ids: tuple[int, int]
    validation_accuracy: float
    model: object
    train_ids: frozenset
    synthetic_source_ids: frozenset
    n_synthetic: int
    view: str | None = None
    test_predictions: np.ndarray | None = None
    empty_batch: bool = False
    synthetic_points: np.ndarray | None = None

    @property
    def weight(self) -> float:
        return self.validation_accuracy


def _fold_seed(cfg, i):
    return derive_seed(cfg.seed, "fold", i)


def _augment(method, train, cfg, fold_seed, alpha, sigma, cache):
    if method == "baseline":
        return SyntheticBatch.empty(train.d, fold_seed, 0.0, "baseline")
    if method == "gaussian_noise":
        return gaussian_noise_augment(train, sigma, cfg.noise_alpha,
                                      derive_seed(fold_seed, "noise"))
    if method == "ficaug":
        key = (fold_seed, train.ids.tobytes())
        tree = None if cache is None else cache.get(key)
        if tree is None:
            kcfg = replace(cfg.refine.kmeans, seed=derive_seed(fold_seed, "kmeans"))
            tree = refine_clusters(train, replace(cfg.refine, kmeans=kcfg))
            if cache is not None:
                cache[key] = tree
        aug = replace(cfg.augment, alpha=alpha, seed=derive_seed(fold_seed, "augment"))
        return sample_from_tree(train, tree, aug)
    raise ConfigurationError(f"unknown augmentation method {method!r}; choose from {METHODS}")


def run_cv(ds: FeatureDataset, method: str, classifier: str, cfg: ExperimentConfig | None = None,
           alpha: float | None = None, sigma: float | None = None,
           test: FeatureDataset | None = None, view: str | None = None,
           cache: dict | None = None) -> list[FoldResult]:
    """One model per leave-pair-out fold.

    Augmentation only ever sees the fold's training rows.  With
    ``cfg.refit_per_fold=False`` the synthetic batch is built once from the
    whole of ``ds`` instead, which leaks validation rows into the generator;
    it exists for replication experiments only.
    """
    cfg = cfg or ExperimentConfig()
    if classifier not in CLASSIFIERS:
        raise ConfigurationError(f"unknown classifier {classifier!r}")
    alpha = cfg.augment.alpha if alpha is None else alpha
    sigma = cfg.noise_sigmas[0] if sigma is None else sigma
    plan = make_leave_pair_out_folds(ds, derive_seed(cfg.seed, "folds"))
    shared = None
    if not cfg.refit_per_fold:
        shared = _augment(method, ds, cfg, derive_seed(cfg.seed, "shared"), alpha, sigma, cache)
    results = []
    for i, (val, train_idx) in enumerate(plan):
        fold_seed = _fold_seed(cfg, i)
        train = ds.subset(train_idx)
        batch = shared if shared is not None else _augment(
            method, train, cfg, fold_seed, alpha, sigma, cache)
        empty = method != "baseline" and len(batch) == 0
        if empty:
            log.warning("fold %d: %s produced no synthetic samples; training on real data only",
                        i, method)
        X = np.vstack([train.X, batch.points]) if len(batch) else train.X
        y = np.concatenate([train.y, batch.labels]) if len(batch) else train.y
        mlp = replace(cfg.mlp, seed=derive_seed(fold_seed, "mlp"))
        model = make_classifier(classifier, cfg.knn_k, mlp).fit(X, y, ds.n_classes)
        val = np.asarray(val)
        acc = float(np.mean(model.predict(ds.X[val]) == ds.y[val]))
        results.append(FoldResult(
            fold=i, method=method, classifier=classifier,
            validation_ids=tuple(int(v) for v in ds.ids[val]),
            validation_accuracy=acc, model=model,
            train_ids=frozenset(int(v) for v in train.ids),
            synthetic_source_ids=frozenset(batch.source_ids()) if len(batch) else frozenset(),
            n_synthetic=len(batch), view=view,
            test_predictions=None if test is None or test.n == 0 else model.predict(test.X),
            empty_batch=empty, synthetic_points=batch.points if len(batch) else None,
        ))
    return results


@dataclass
class EnsembleResult:
    labels: dict  # key -> final label over all views
    truth: dict
    tallies: dict  # key -> summed weight per class
    per_view_labels: dict  # view -> key -> label
    per_view_accuracy: dict
    accuracy: float
    unweighted_fallback: bool = False


def _keys(test: FeatureDataset):
    if test.subject_ids is not None:
        return [str(s) for s in test.subject_ids]
    return [int(i) for i in test.ids]


def weighted_majority_vote(results: list[FoldResult], test: FeatureDataset) -> EnsembleResult:
    """Each model votes for its predicted label with weight = its validation accuracy.

    Votes are tallied per view, then summed across views per subject (per test
    row when there are no subject ids).  The largest tally wins, ties going to
    the smaller class index; zero-weight models abstain unless every weight is
    zero, in which case all models vote with weight one.
    """
    L = test.n_classes
    weights = np.array([r.weight for r in results], dtype=np.float64)
    fallback = not np.any(weights > 0)
    if fallback:
        log.warning("every model has zero validation accuracy; using unweighted majority")
        weights = np.ones(len(results))
    keys = _keys(test)
    truth = {}
    for k, lab in zip(keys, test.y):
        if truth.setdefault(k, int(lab)) != int(lab):
            raise ConfigurationError(f"subject {k!r} carries conflicting labels")
    per_view_tally: dict = defaultdict(lambda: defaultdict(lambda: np.zeros(L)))
    for r, w in zip(results, weights):
        if w <= 0:
            continue
        if r.view is None or test.views is None:
            rows = np.arange(test.n)
        else:
            rows = np.flatnonzero(test.views == test.view_names.index(r.view))
        preds = r.test_predictions
        if preds is None or len(preds) != len(rows):
            preds = r.model.predict(test.X[rows])
        for row, p in zip(rows, preds):
            per_view_tally[r.view][keys[row]][int(p)] += w
    tallies: dict = defaultdict(lambda: np.zeros(L))
    per_view_labels, per_view_accuracy = {}, {}
    for v in sorted(per_view_tally, key=lambda s: (s is None, s)):
        labs = {}
        for k, t in per_view_tally[v].items():
            tallies[k] += t
            labs[k] = int(np.argmax(t))
        per_view_labels[v] = labs
        per_view_accuracy[v] = float(np.mean([labs[k] == truth[k] for k in labs]))
    labels = {k: int(np.argmax(t)) for k, t in tallies.items()}
    acc = float(np.mean([labels[k] == truth[k] for k in labels])) if labels else float("nan")
    return EnsembleResult(labels, truth, dict(tallies), per_view_labels, per_view_accuracy, acc,
                          fallback)


def mean_accuracy(results) -> float:
    return float(np.mean([r.validation_accuracy for r in results]))


def grid_search_alpha(ds: FeatureDataset, alphas, classifier: str,
                      cfg: ExperimentConfig | None = None, method="ficaug",
                      test=None, view=None, cache=None):
    """Return ``(best_alpha, {alpha: mean validation accuracy}, best fold results)``.

    Ties go to the smaller alpha.
    """
    cfg = cfg or ExperimentConfig()
    alphas = sorted(float(a) for a in alphas)
    if not alphas:
        raise ConfigurationError("alpha grid is empty")
    cache = {} if cache is None else cache
    table, runs = {}, {}
    for a in alphas:
        runs[a] = run_cv(ds, method, classifier, cfg, alpha=a, test=test, view=view, cache=cache)
        table[a] = mean_accuracy(runs[a])
    best = max(alphas, key=lambda a: (table[a], -a))
    return best, table, runs[best]


def _grid_sigma(ds, classifier, cfg, test, view):
    table, runs = {}, {}
    for s in sorted(cfg.noise_sigmas):
        runs[s] = run_cv(ds, "gaussian_noise", classifier, cfg, sigma=s, test=test, view=view)
        table[s] = mean_accuracy(runs[s])
    best = max(table, key=lambda s: (table[s], -s))
    return best, table, runs[best]


@dataclass
class ExperimentReport:
    rows: list[dict]
    meta: dict
    folds: list[dict]

    def to_dict(self):
        return {"meta": self.meta, "rows": self.rows, "folds": self.folds}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def row(self, view, method, classifier):
        for r in self.rows:
            if (r["view"], r["method"], r["classifier"]) == (view, method, classifier):
                return r
        raise KeyError((view, method, classifier))

    def table(self) -> str:
        """Method rows, classifier columns, validation mean +- std and test accuracy."""
        classifiers = list(dict.fromkeys(r["classifier"] for r in self.rows))
        lines = []
        for view in dict.fromkeys(r["view"] for r in self.rows):
            lines.append(f"[{view}]")
            head = f"{'method':<16}" + "".join(f"{c + ' val':>18}{c + ' test':>10}" for c in classifiers)
            lines.append(head)
            for method in dict.fromkeys(r["method"] for r in self.rows):
                cells = f"{method:<16}"
                for c in classifiers:
                    r = self.row(view, method, c)
                    val = f"{100 * r['val_mean']:.2f}±{100 * r['val_std']:.2f}"
                    test = "-" if r["test_accuracy"] is None else f"{100 * r['test_accuracy']:.2f}"
                    cells += f"{val:>18}{test:>10}"
                lines.append(cells)
            lines.append("")
        return "\n".join(lines)


ALL_VIEWS = "all-views"


def _config_dict(cfg):
    return json.loads(json.dumps(asdict(cfg), default=str))


def compare_methods(ds: FeatureDataset, methods=METHODS, classifiers=CLASSIFIERS,
                    cfg: ExperimentConfig | None = None,
                    test: FeatureDataset | None = None) -> ExperimentReport:
    """Cross of method x classifier x view plus an all-views ensemble row.

    Validation columns are the mean and population std of per-fold accuracy;
    the all-views row pools every fold of every view.  Test accuracy comes from
    the weighted-vote ensemble of the fold models and is only reported when a
    held-out ``test`` set is given; it never influences the alpha search.
    """
    cfg = cfg or ExperimentConfig()
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}; choose from {METHODS}")
    if ds.views is not None:
        views = list(zip(ds.view_names, split_by_view(ds)))
    else:
        views = [(None, ds)]
    test_views = {}
    if test is not None:
        if test.views is not None:
            test_views = {name: test.subset(np.flatnonzero(test.views == i))
                          for i, name in enumerate(test.view_names)}
        else:
            test_views = {None: test}
    rows, folds = [], []
    caches = {vname: {} for vname, _ in views}
    for method in methods:
        for clf in classifiers:
            pooled = []
            for vname, vds in views:
                vtest = test_views.get(vname)
                chosen = None
                grid = None
                if method == "ficaug" and cfg.alphas:
                    chosen, grid, res = grid_search_alpha(vds, cfg.alphas, clf, cfg, test=vtest,
                                                          view=vname, cache=caches[vname])
                elif method == "ficaug":
                    chosen = cfg.augment.alpha
                    res = run_cv(vds, method, clf, cfg, alpha=chosen, test=vtest, view=vname,
                                 cache=caches[vname])
                elif method == "gaussian_noise":
                    chosen, grid, res = _grid_sigma(vds, clf, cfg, vtest, vname)
                else:
                    res = run_cv(vds, method, clf, cfg, test=vtest, view=vname)
                pooled.extend(res)
                accs = [r.validation_accuracy for r in res]
                test_acc = None
                if vtest is not None and vtest.n:
                    ens = weighted_majority_vote(res, vtest)
                    test_acc = ens.accuracy
                rows.append({
                    "view": ALL_VIEWS if vname is None else vname,
                    "method": method, "classifier": clf,
                    "val_mean": float(np.mean(accs)), "val_std": float(np.std(accs)),
                    "test_accuracy": test_acc, "n_folds": len(res),
                    "param": chosen,
                    "grid": None if grid is None else {repr(k): v for k, v in grid.items()},
                })
                for r in res:
                    folds.append({
                        "view": vname, "method": method, "classifier": clf, "fold": r.fold,
                        "validation_ids": list(r.validation_ids),
                        "validation_accuracy": r.validation_accuracy,
                        "n_synthetic": r.n_synthetic, "empty_batch": r.empty_batch,
                    })
            if ds.views is not None:
                accs = [r.validation_accuracy for r in pooled]
                test_acc = None
                if test is not None and test.n:
                    test_acc = weighted_majority_vote(pooled, test).accuracy
                rows.append({
                    "view": ALL_VIEWS, "method": method, "classifier": clf,
                    "val_mean": float(np.mean(accs)), "val_std": float(np.std(accs)),
                    "test_accuracy": test_acc, "n_folds": len(pooled), "param": None, "grid": None,
                })
    meta = {
        "config": _config_dict(cfg),
        "methods": list(methods),
        "classifiers": list(classifiers),
        "notes": [
            "classifiers are kNN and a one-hidden-layer MLP; SVM and random forest are not provided",
            "augmentation is refit inside every fold" if cfg.refit_per_fold
            else "augmentation fit once on all training data (validation rows leak into the generator)",
            "validation std is the population std over 2-sample folds",
        ],
    }
    return ExperimentReport(rows, meta, folds)
