"""Command-line entry point: ``ficaug {inspect,cluster,augment,validate,compare,fixture}``.

Effective settings are built from defaults, then an optional JSON ``--config``
file, then command-line flags.  Every command that writes files also writes a
manifest with the effective config, the derived seeds and SHA-256 digests of
its inputs and outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import ColumnSchema, load_dataset, save_dataset, split_by_view, standardize
from .errors import ConfigurationError, FicaugError
from .evaluate import METHODS, ExperimentConfig, compare_methods
from .fixtures import make_blobs, make_multiview
from .kmeans import KMeansConfig, sweep_k
from .models import CLASSIFIERS, MlpConfig
from .purity import NodeStatus, RefinementConfig, refine_clusters
from .sampler import (AugmentConfig, SyntheticBatch, augment_dataset, export_attribute_vectors)
from .seeding import derive_seed
from .stats import TestReport, similarity_report

log = logging.getLogger("ficaug")

OUT_ENV = "FICAUG_OUT"


@dataclass
class RunConfig:
    data: str | None = None
    label_col: str = "label"
    subject_col: str | None = None
    view_col: str | None = None
    feature_cols: list | None = None
    delimiter: str | None = None
    standardize: bool = False
    seed: int = 0
    out: str = "ficaug-out"
    # k-means and refinement
    k: int = 3
    auto_k: bool = False
    k_sweep: str | None = None
    kmeans_seed: int | None = None
    n_init: int = 10
    max_iters: int = 300
    tol: float = 1e-6
    threshold: float = 0.5
    max_depth: int = 8
    # augmentation
    alpha: float = 1.0
    alphas: list | None = None
    aug_seed: int | None = None
    clamp_range: list = field(default_factory=lambda: [0.0, 5.0])
    no_clamp: bool = False
    # validation
    synthetic: str | None = None
    n_per_side: int = 20
    stats_seed: int | None = None
    # comparison
    methods: list = field(default_factory=lambda: list(METHODS))
    classifiers: list = field(default_factory=lambda: list(CLASSIFIERS))
    test: str | None = None
    noise_sigmas: list = field(default_factory=lambda: [0.25])
    noise_alpha: float = 1.0
    knn_k: int = 3
    mlp_hidden: int = 16
    mlp_lr: float = 0.05
    mlp_epochs: int = 500
    mlp_l2: float = 1e-4
    refit_per_fold: bool = True

    def stage_seed(self, stage):
        explicit = getattr(self, f"{stage}_seed", None)
        return explicit if explicit is not None else derive_seed(self.seed, stage)

    def schema(self):
        return ColumnSchema(self.label_col, self.subject_col, self.view_col, self.feature_cols,
                            self.delimiter)

    def kmeans_config(self):
        return KMeansConfig(k=self.k, max_iters=self.max_iters, tol=self.tol,
                            seed=self.stage_seed("kmeans"), n_init=self.n_init)

    def refine_config(self):
        return RefinementConfig(threshold=self.threshold, max_depth=self.max_depth,
                                kmeans=self.kmeans_config(), auto_k=self.auto_k)

    def augment_config(self):
        return AugmentConfig(alpha=self.alpha, seed=self.stage_seed("aug"))

    def experiment_config(self):
        return ExperimentConfig(
            refine=self.refine_config(), augment=self.augment_config(),
            alphas=tuple(self.alphas) if self.alphas else None,
            noise_sigmas=tuple(self.noise_sigmas), noise_alpha=self.noise_alpha,
            knn_k=self.knn_k,
            mlp=MlpConfig(hidden=self.mlp_hidden, learning_rate=self.mlp_lr,
                          epochs=self.mlp_epochs, l2=self.mlp_l2),
            seed=self.seed, refit_per_fold=self.refit_per_fold,
        )

    def effective(self):
        d = asdict(self)
        d["derived_seeds"] = {s: self.stage_seed(s) for s in ("kmeans", "aug", "stats")}
        return d


def _csv_list(cast):
    def parse(text):
        return [cast(t) for t in text.split(",") if t.strip()]
    return parse


def _build_parser():
    p = argparse.ArgumentParser(prog="ficaug", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run")
    g.add_argument("--config", help="JSON file of RunConfig fields")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", help=f"output directory (env {OUT_ENV} overrides the default)")
    g.add_argument("-v", "--verbose", action="store_true")
    g = common.add_argument_group("data")
    g.add_argument("--data", help="delimited input file with one header row")
    g.add_argument("--label-col")
    g.add_argument("--subject-col")
    g.add_argument("--view-col")
    g.add_argument("--feature-cols", type=_csv_list(str))
    g.add_argument("--delimiter")
    g.add_argument("--standardize", action="store_true", default=None)
    g = common.add_argument_group("clustering")
    g.add_argument("--k", type=int, help="root number of clusters (must exceed the class count)")
    g.add_argument("--auto-k", action="store_true", default=None,
                   help="choose the root k at the elbow of an inertia sweep")
    g.add_argument("--k-sweep", help="print/write the inertia curve for k in a..b")
    g.add_argument("--kmeans-seed", type=int)
    g.add_argument("--n-init", type=int)
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--threshold", type=float)
    g.add_argument("--max-depth", type=int)
    g = common.add_argument_group("augmentation")
    g.add_argument("--alpha", type=float)
    g.add_argument("--alphas", type=_csv_list(float), help="alpha grid, e.g. 1,2,4")
    g.add_argument("--aug-seed", type=int)
    g.add_argument("--clamp-range", type=_csv_list(float))
    g.add_argument("--no-clamp", action="store_true", default=None)
    g = common.add_argument_group("validation")
    g.add_argument("--synthetic", help="synthetic batch file written by `augment`")
    g.add_argument("--n-per-side", type=int)
    g.add_argument("--stats-seed", type=int)
    g = common.add_argument_group("comparison")
    g.add_argument("--methods", type=_csv_list(str))
    g.add_argument("--classifiers", type=_csv_list(str))
    g.add_argument("--test", help="held-out test file, same schema as --data")
    g.add_argument("--noise-sigmas", type=_csv_list(float))
    g.add_argument("--noise-alpha", type=float)
    g.add_argument("--knn-k", type=int)
    g.add_argument("--mlp-hidden", type=int)
    g.add_argument("--mlp-lr", type=float)
    g.add_argument("--mlp-epochs", type=int)
    g.add_argument("--mlp-l2", type=float)
    g.add_argument("--no-refit-per-fold", dest="refit_per_fold", action="store_false", default=None)

    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("inspect", parents=[common], help="summarize a dataset")
    sub.add_parser("cluster", parents=[common], help="k sweep or refinement tree")
    sub.add_parser("augment", parents=[common], help="generate and export synthetic samples")
    sub.add_parser("validate", parents=[common], help="real vs synthetic statistical tests")
    sub.add_parser("compare", parents=[common], help="baseline / noise / cluster-guided comparison")
    fx = sub.add_parser("fixture", parents=[common], help="write a synthetic test dataset")
    fx.add_argument("--kind", choices=["blob", "multiview"], default="blob")
    fx.add_argument("--n-per-class", type=int, default=20)
    fx.add_argument("--d", type=int, default=15)
    fx.add_argument("--gap", type=float, default=3.0)
    fx.add_argument("--subjects", type=int, default=55)
    fx.add_argument("--views", type=int, default=5)
    fx.add_argument("--path", default=None, help="output file (default <out>/fixture.csv)")
    return p


_FIXTURE_ONLY = {"kind", "n_per_class", "d", "gap", "subjects", "views", "path"}


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    env_out = os.environ.get(OUT_ENV)
    if env_out:
        cfg.out = env_out
    known = {f.name for f in fields(RunConfig)}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **loaded)
    for name, value in vars(args).items():
        if name in known and value is not None:
            setattr(cfg, name, value)
    if cfg.k_sweep is not None and ".." not in cfg.k_sweep:
        raise ConfigurationError("--k-sweep expects a range like 2..10")
    return cfg


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(cfg: RunConfig, command, out: Path, inputs, outputs):
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.effective(),
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).exists()},
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
    }
    path = out / f"manifest-{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _load(cfg: RunConfig, path=None) -> FeatureDataset:
    path = path or cfg.data
    if not path:
        raise ConfigurationError("no dataset given (--data)")
    ds = load_dataset(path, cfg.schema())
    if cfg.standardize:
        ds, _ = standardize(ds)
    return ds


def _views(ds):
    if ds.views is None:
        return [(None, ds)]
    return list(zip(ds.view_names, split_by_view(ds)))


def _out_dir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_inspect(cfg: RunConfig) -> int:
    ds = _load(cfg)
    counts = ds.class_counts()
    hist = ",".join(f"{name}:{int(c)}" for name, c in zip(ds.label_names, counts))
    print(f"n={ds.n} d={ds.d} classes={{{hist}}}")
    if ds.views is not None:
        print("view\tn\t" + "\t".join(ds.label_names))
        for v, name in enumerate(ds.view_names):
            mask = ds.views == v
            per = np.bincount(ds.y[mask], minlength=ds.n_classes)
            print(f"{name}\t{int(mask.sum())}\t" + "\t".join(str(int(c)) for c in per))
    if ds.subject_ids is not None:
        print(f"subjects={len(set(ds.subject_ids))}")
    print("feature\tmin\tmax\tmean")
    for j, name in enumerate(ds.feature_names):
        col = ds.X[:, j]
        print(f"{name}\t{col.min():.6g}\t{col.max():.6g}\t{col.mean():.6g}")
    return 0


def cmd_cluster(cfg: RunConfig) -> int:
    ds = _load(cfg)
    out = _out_dir(cfg)
    outputs = []
    if cfg.k_sweep:
        lo, hi = (int(t) for t in cfg.k_sweep.split(".."))
        if hi < lo:
            raise ConfigurationError(f"empty k range {cfg.k_sweep}")
        curve = sweep_k(ds.X, range(lo, hi + 1), cfg.kmeans_config())
        path = out / "elbow.csv"
        path.write_text("k,inertia\n" + "".join(f"{k},{v!r}\n" for k, v in curve))
        for k, v in curve:
            print(f"k={k}\tinertia={v:.6g}")
        outputs.append(path)
    else:
        for vname, vds in _views(ds):
            if cfg.k <= vds.n_classes and not cfg.auto_k:
                raise ConfigurationError(
                    f"--k {cfg.k} is too small: the root k must exceed the number of classes "
                    f"({vds.n_classes})")
            tree = refine_clusters(vds, cfg.refine_config())
            suffix = "" if vname is None else f"-{vname}"
            path = out / f"tree{suffix}.tsv"
            path.write_text(tree.report(vds.label_names))
            outputs.append(path)
            leaves = tree.leaves()
            pure = sum(n.status is NodeStatus.PURE for n in leaves)
            print(f"{vname or 'all'}: root_k={tree.root_k} splits={tree.n_splits} "
                  f"pure_leaves={pure} discarded_leaves={len(leaves) - pure} depth={tree.depth}")
    _write_manifest(cfg, "cluster", out, [cfg.data], outputs)
    return 0


def _batch_header(ds):
    return ["view", "label", "path", "draw", *ds.feature_names]


def _write_views_batch(path, ds, parts):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_batch_header(ds))
        for vname, batch in parts:
            for row, lab, p, k in zip(batch.points, batch.labels, batch.paths, batch.draws):
                w.writerow([vname or "", ds.label_names[lab], ".".join(map(str, p)), int(k),
                            *(repr(float(v)) for v in row)])


def _read_views_batch(path, ds):
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:4] != ["view", "label", "path", "draw"]:
        raise ConfigurationError(f"{path} is not a synthetic batch file")
    body = rows[1:]
    lookup = {name: i for i, name in enumerate(ds.label_names)}
    views = [r[0] or None for r in body]
    labels = np.array([lookup[r[1]] for r in body], dtype=np.int64)
    X = np.array([[float(v) for v in r[4:]] for r in body], dtype=np.float64).reshape(len(body), -1)
    return views, labels, X


def cmd_augment(cfg: RunConfig) -> int:
    ds = _load(cfg)
    out = _out_dir(cfg)
    parts, outputs, total_clamped = [], [], 0
    for vname, vds in _views(ds):
        batch, tree = augment_dataset(vds, cfg.refine_config(), cfg.augment_config())
        suffix = "" if vname is None else f"-{vname}"
        tree_path = out / f"tree{suffix}.tsv"
        tree_path.write_text(tree.report(vds.label_names))
        outputs.append(tree_path)
        parts.append((vname, batch))
    batch_path = out / "synthetic.csv"
    _write_views_batch(batch_path, ds, parts)
    outputs.append(batch_path)
    n_total = sum(len(b) for _, b in parts)
    export_path = out / "attributes.csv"
    if n_total:
        merged = SyntheticBatch(
            np.vstack([b.points for _, b in parts if len(b)]),
            np.concatenate([b.labels for _, b in parts if len(b)]),
            [p for _, b in parts for p in b.paths], np.concatenate([b.draws for _, b in parts]),
            cfg.stage_seed("aug"), cfg.alpha)
        clamp = None if cfg.no_clamp else tuple(cfg.clamp_range)
        res = export_attribute_vectors(merged, export_path, ds.label_names, ds.feature_names, clamp)
        total_clamped = res.clamp_events
    else:
        export_path.write_text(",".join(["id", "label", *ds.feature_names]) + "\n")
        print("warning: no pure clusters were found; the synthetic batch is empty", file=sys.stderr)
    outputs.append(export_path)
    manifest = _write_manifest(cfg, "augment", out, [cfg.data], outputs)
    print(f"synthetic={n_total} clamp_events={total_clamped} manifest={manifest}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    ds = _load(cfg)
    if not cfg.synthetic:
        raise ConfigurationError("validate needs --synthetic <batch file>")
    views, labels, X = _read_views_batch(cfg.synthetic, ds)
    out = _out_dir(cfg)
    rows = []
    for vname, vds in _views(ds):
        mask = np.array([v == vname for v in views], dtype=bool)
        rep = similarity_report(vds, _Batch(X[mask], labels[mask]), cfg.n_per_side,
                                cfg.stage_seed("stats"), view=vname)
        rows.extend(rep.rows)
    report = TestReport(rows, cfg.n_per_side, {"seed": cfg.stage_seed("stats")})
    txt = out / "stats.txt"
    txt.write_text(report.table())
    csv_path = report.write(out / "stats.csv")
    json_path = report.write(out / "stats.json")
    print(report.table(), end="")
    _write_manifest(cfg, "validate", out, [cfg.data, cfg.synthetic], [txt, csv_path, json_path])
    return 0


@dataclass
class _Batch:
    points: np.ndarray
    labels: np.ndarray


def cmd_compare(cfg: RunConfig) -> int:
    ds = _load(cfg)
    test = _load(cfg, cfg.test) if cfg.test else None
    out = _out_dir(cfg)
    report = compare_methods(ds, cfg.methods, cfg.classifiers, cfg.experiment_config(), test)
    js = out / "experiment.json"
    js.write_text(report.to_json())
    txt = out / "experiment.txt"
    txt.write_text(report.table())
    print(report.table())
    print(f"digest={report.digest()}")
    _write_manifest(cfg, "compare", out, [cfg.data, cfg.test], [js, txt])
    return 0


def cmd_fixture(cfg: RunConfig, args) -> int:
    if args.kind == "blob":
        ds = make_blobs(args.n_per_class, args.d, args.gap, seed=cfg.seed)
    else:
        ds = make_multiview(args.subjects, args.views, args.d, seed=cfg.seed)
    path = Path(args.path) if args.path else _out_dir(cfg) / "fixture.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, path)
    print(f"wrote {path} (n={ds.n} d={ds.d})")
    return 0


COMMANDS = {
    "inspect": cmd_inspect,
    "cluster": cmd_cluster,
    "augment": cmd_augment,
    "validate": cmd_validate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "fixture":
            return cmd_fixture(cfg, args)
        return COMMANDS[args.command](cfg)
    except FicaugError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
